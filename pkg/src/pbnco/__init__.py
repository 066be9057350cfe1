"""Population-based neural combinatorial optimization for Max-Cut and MIS."""
from .graphs import GraphInstance, generate_er, generate_rb, read_instance, write_instance
from .problems import MC, MIS, objective, reward_scale
from .gnn import PolicyNet, NetConfig
from .memory import SharedMemory
from .search import SearchConfig, pbnco_run
from .trace import AnytimeTrace, diversity_trace

__version__ = "0.1.0"
