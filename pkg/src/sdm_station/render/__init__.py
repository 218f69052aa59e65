from .layout import Speaker, SpeakerLayout, default_layout, triangulate_layout
from .vbap import compute_gains, distance_attenuation, intensity_direction
from .engine import RenderService, RendererState, SoundSource, render_block
from .offline import render_session_to_wav

__all__ = [
    "Speaker",
    "SpeakerLayout",
    "default_layout",
    "triangulate_layout",
    "compute_gains",
    "distance_attenuation",
    "intensity_direction",
    "RendererState",
    "RenderService",
    "SoundSource",
    "render_block",
    "render_session_to_wav",
]
