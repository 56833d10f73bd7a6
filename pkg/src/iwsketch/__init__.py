"""Width-based planning with sketch and learned subgoal policies."""

__version__ = "0.1.0"
