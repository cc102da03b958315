__all__ = ["decomp", "genfun", "graph_core", "graph_io", "kms", "oracle", "spectral"]
