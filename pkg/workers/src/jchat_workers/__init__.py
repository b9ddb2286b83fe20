"""Inference workers for the dialogue-corpus pipeline (protocol jchat-worker/1)."""

__version__ = "0.1.0"
