"""wavec: compiler and cycle-accurate simulator for wavefront-threaded hardware programs."""

__version__ = "0.1.0"
