"""Parameter containers shared by every layer."""

from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from dsgc.core.tensor import Parameter, Tensor
from dsgc.utils.error_handlers import ConfigurationError, DimensionError


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    """uniform(+-sqrt(6 / (fan_in + fan_out)))."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


class Module:
    """
    Named parameters, child modules and a train/eval flag.

    Parameter names are dotted paths (``layers.0.U``). A module that borrows
    another module's submodule (filter sharing) keeps it out of ``_children``
    so it is counted and optimized once.
    """

    kind = "module"

    def __init__(self) -> None:
        self._params: Dict[str, Parameter] = {}
        self._children: Dict[str, "Module"] = {}
        self.training = True

    def register_parameter(self, name: str, value: np.ndarray) -> Parameter:
        param = Parameter(value, name=name)
        self._params[name] = param
        return param

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, param in self._params.items():
            yield prefix + name, param
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def param_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        if missing:
            raise ConfigurationError(f"state is missing parameters: {', '.join(missing)}")
        for name, param in params.items():
            value = np.asarray(state[name])
            if value.shape != param.shape:
                raise DimensionError(f"parameter {name!r} has the wrong shape", shapes=[param.shape, value.shape])
            param.data = np.ascontiguousarray(value, dtype=param.data.dtype)
            param.zero_grad()

    def manifest(self) -> Dict[str, Any]:
        return {"layer_kind": self.kind}

    def forward(self, *args: Any, **kwargs: Any) -> Tensor:
        raise NotImplementedError

    def __call__(self, *args: Any, **kwargs: Any) -> Tensor:
        return self.forward(*args, **kwargs)
