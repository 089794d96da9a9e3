"""Cross-lingual POS projection over multilingual alignment graphs."""
__version__ = "0.1.0"
