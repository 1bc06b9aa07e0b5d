"""Two-view ECG beat classification: a recurrent net on raw beats, an MLP on
Gramian Angular Field images, and Dempster-Shafer fusion of their outputs."""

__version__ = "0.1.0"
