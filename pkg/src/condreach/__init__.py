"""Conditional reachability on MDPs via expected total rewards."""

from .model import Action, Mdp, ModelError, Query, parse_model, serialize_model

__all__ = ["Action", "Mdp", "ModelError", "Query", "parse_model", "serialize_model"]
__version__ = "0.1.0"
