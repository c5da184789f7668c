"""adextract: turns frame images and cast profile photos into the
detection/embedding interchange files the AD pipeline consumes."""

__version__ = "0.1.0"
