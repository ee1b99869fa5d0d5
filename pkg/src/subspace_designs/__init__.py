"""
Subspace design toolkit: exact design arithmetic, linear algebra over prime
fields, matrix group orbits on Grassmannians, and design verification.
"""
