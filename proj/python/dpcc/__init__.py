"""Python bindings for the dpcc dynamic point cloud geometry codec."""

from ._dpcc import (  # noqa: F401
    Error,
    Model,
    allocate_target,
    bd_psnr,
    bd_rate,
    bitrate_error,
    d1_psnr,
    d2_psnr,
    decode,
    encode,
    read_ply,
    select_route,
    synth_sequence,
    train,
    voxelize,
    write_ply,
)
