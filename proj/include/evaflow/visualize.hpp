#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evaflow/flow.hpp"
#include "evaflow/mocomp.hpp"

namespace evaflow {

/// Color-wheel RGB: hue = flow direction, saturation = magnitude / max_magnitude
/// (clamped), value = 1. Zero flow maps to white. max_magnitude <= 0 picks the
/// largest valid magnitude. Invalid pixels are black.
std::vector<std::uint8_t> flow_to_rgb(const FlowField& flow, double max_magnitude = 0.0);
/// Binary 8-bit PPM (P6).
void render_flow_image(const FlowField& flow, const std::string& path, double max_magnitude = 0.0);
/// Binary 16-bit PGM (P5) of a count frame scaled so the maximum maps to 65535.
void render_count_image(const MCFrame& frame, const std::string& path);

}  // namespace evaflow
