"""Package for DSKF implementation modules.

Everything under this package is explicitly not a stable interface -- that is, not intended for use by scripts or notebooks outside DSKF. It is organized according to convenience rather than API design.
"""
