from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class ModelConfig:
    vocab_size: int
    embed_dim: int = 128
    hidden_dim: int = 256
    key_dim: int = 128  # time position encoding p^i == memory key
    global_dim: int = 512
    local_dim: int = 256
    max_events: int = 8
    polish_iters: int = 2
    use_graph: bool = True
    re_residual: bool = False
    use_copy: bool = True
    init_range: float = 0.02

    def __post_init__(self):
        for name in ("vocab_size", "embed_dim", "hidden_dim", "key_dim", "global_dim", "local_dim", "max_events"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.local_dim != self.hidden_dim:
            raise ValueError("local values store a^i unprojected, so local_dim must equal hidden_dim")
        if self.polish_iters < 1:
            raise ValueError("polish_iters must be >= 1")
        if self.init_range <= 0:
            raise ValueError("init_range must be positive")

    def to_dict(self) -> dict:
        return asdict(self)
