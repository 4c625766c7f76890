"""
krflow: numerical laboratory for the normalized Kähler–Ricci flow on flat tori.

Entry point: src.krflow.cli.main (see main.py).
"""
__version__ = "0.1.0"
