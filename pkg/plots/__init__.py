"""Figure scripts over the simulation CLI's CSV outputs.

Each module pairs a loader with a renderer so tests can read plotted data
back; rendering is headless (Agg) and every figure carries the input file's
fingerprint in its caption.
"""
