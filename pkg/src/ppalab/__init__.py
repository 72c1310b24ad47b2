"""Numerical lab for proximal point iterations on set-valued monotone maps.

Modules: ``setgeom`` (value sets, distances, excess), ``operators`` (maps,
resolvents, monotonicity checks), ``regularity`` (moduli and error-bound
probes), ``ppa`` (the iteration and its rate certificates) and ``lab``
(scenario files and the ``ppa-lab`` command).
"""

__version__ = "0.1.0"
