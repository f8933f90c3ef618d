"""ECG statistics under uncertain electrode positions via lead fields and low-rank correlation."""
from __future__ import annotations

__version__ = "0.1.0"
