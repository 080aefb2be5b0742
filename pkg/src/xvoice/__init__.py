"""xvoice: annotate HTML pages with synchronized, browsable voice dialogs."""

__version__ = "0.1.0"
