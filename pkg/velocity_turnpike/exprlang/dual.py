"""
Forward-mode dual numbers carrying a gradient vector.
"""

import math
from typing import Union

import numpy as np

Number = Union[int, float]


class Dual:
    """Value plus partial derivatives w.r.t. a fixed list of variables."""

    __slots__ = ("value", "grad")

    def __init__(self, value: float, grad: np.ndarray):
        self.value = float(value)
        self.grad = grad

    @staticmethod
    def constant(value: float, size: int) -> "Dual":
        return Dual(value, np.zeros(size))

    @staticmethod
    def variable(value: float, index: int, size: int) -> "Dual":
        grad = np.zeros(size)
        grad[index] = 1.0
        return Dual(value, grad)

    def __add__(self, other: "Dual") -> "Dual":
        return Dual(self.value + other.value, self.grad + other.grad)

    def __sub__(self, other: "Dual") -> "Dual":
        return Dual(self.value - other.value, self.grad - other.grad)

    def __mul__(self, other: "Dual") -> "Dual":
        return Dual(self.value * other.value, self.grad * other.value + other.grad * self.value)

    def __truediv__(self, other: "Dual") -> "Dual":
        # caller guarantees other.value != 0
        inv = 1.0 / other.value
        value = self.value * inv
        return Dual(value, (self.grad - other.grad * value) * inv)

    def __neg__(self) -> "Dual":
        return Dual(-self.value, -self.grad)

    def __repr__(self) -> str:
        return f"Dual({self.value!r}, {self.grad!r})"

    # ---------- elementary functions ----------

    def sin(self) -> "Dual":
        return Dual(math.sin(self.value), math.cos(self.value) * self.grad)

    def cos(self) -> "Dual":
        return Dual(math.cos(self.value), -math.sin(self.value) * self.grad)

    def exp(self) -> "Dual":
        e = math.exp(self.value)
        return Dual(e, e * self.grad)

    def sinh(self) -> "Dual":
        return Dual(math.sinh(self.value), math.cosh(self.value) * self.grad)

    def cosh(self) -> "Dual":
        return Dual(math.cosh(self.value), math.sinh(self.value) * self.grad)

    def tanh(self) -> "Dual":
        t = math.tanh(self.value)
        return Dual(t, (1.0 - t * t) * self.grad)

    def abs(self) -> "Dual":
        # derivative at 0 taken as 0
        sign = (self.value > 0) - (self.value < 0)
        return Dual(abs(self.value), sign * self.grad)

    def pow_const(self, c: float) -> "Dual":
        if c == 0.0:
            return Dual(1.0, np.zeros_like(self.grad))
        value = self.value ** c
        return Dual(value, c * self.value ** (c - 1.0) * self.grad)

    def pow_dual(self, other: "Dual") -> "Dual":
        # caller guarantees self.value > 0
        log_b = math.log(self.value)
        value = math.exp(other.value * log_b)
        return Dual(value, value * (other.grad * log_b + other.value * self.grad / self.value))
