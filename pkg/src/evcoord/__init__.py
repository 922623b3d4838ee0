"""Fully distributed coordination of electric vehicle charging schedules.

Core pieces: per-vehicle constraint construction (:mod:`evcoord.fleet`),
the quadratic serving-cost model (:mod:`evcoord.cost`), the peer-to-peer
coordination loop (:mod:`evcoord.distributed`), the communication-graph
simulator (:mod:`evcoord.network`), the centralized reference solver
(:mod:`evcoord.central`), convergence metrics (:mod:`evcoord.metrics`),
and scenario files (:mod:`evcoord.scenario`). A FastAPI service
(:mod:`evcoord.service`) wraps the package; the CLI is a thin client of it.
"""

__version__ = "0.1.0"
