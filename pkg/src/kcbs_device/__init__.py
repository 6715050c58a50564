"""Single measurement device, used twice in a row, on the KCBS five-cycle."""

__version__ = "0.1.0"
