"""Anytime event-camera optical flow toolkit."""

from ._evaflow import (
    Error,
    EventWindow,
    FlowField,
    build_uvg,
    build_voxel_grid,
    epe,
    evaluate,
    fwl,
    infer,
    load_events,
    load_flow,
    motion_compensate,
    rfwl,
    run_cli,
    save_events,
    save_flow,
    simulate,
    stream_uvg,
    version,
)

__version__ = version()
