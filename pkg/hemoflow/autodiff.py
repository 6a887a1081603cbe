import numpy as np
from scipy.special import expit

__all__ = [
    "Tape",
    "Variable",
    "value_of",
    "tanh",
    "exp",
    "log",
    "sqrt",
    "softplus",
    "sigmoid",
    "absolute",
    "square",
]


def unbroadcast(grad, shape):
    """Return `grad` summed down to `shape`, undoing numpy broadcasting"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def value_of(x):
    """Return the primal value of `x`, a `Variable` or an array-like"""
    return x.value if isinstance(x, Variable) else x


class Tape:
    """A Wengert list of array-valued operations

    Nodes are appended in evaluation order, which is therefore a valid
    topological order; `gradient()` sweeps it once in reverse.
    """

    __slots__ = ("parents",)

    def __init__(self):
        """Construct an empty tape"""
        self.parents = []

    def __len__(self):
        """Return the number of recorded nodes"""
        return len(self.parents)

    def variable(self, value):
        """Return a new leaf variable holding `value`"""
        return self.record(np.asarray(value, dtype=float), ())

    def record(self, value, parents):
        """Append a node computed from `parents`, pairs of a variable and the
        function mapping the node's adjoint to that variable's adjoint
        contribution
        """
        index = len(self.parents)
        self.parents.append(tuple((p.index, vjp) for p, vjp in parents))
        return Variable(self, index, value)

    def gradient(self, output, wrt):
        """Return the gradients of scalar `output` with respect to each
        variable in `wrt`

        Variables that `output` does not depend on get zero gradients.
        Raises `ValueError` if `output` is not a scalar of this tape.
        """
        if not isinstance(output, Variable) or output.tape is not self:
            raise ValueError("output must be a variable recorded on this tape")
        if output.value.size != 1:
            raise ValueError(f"output must be scalar, got shape {output.value.shape}")
        adjoints = [None] * len(self.parents)
        adjoints[output.index] = np.ones_like(output.value)
        for index in range(output.index, -1, -1):
            adjoint = adjoints[index]
            if adjoint is None:
                continue
            for parent, vjp in self.parents[index]:
                contribution = vjp(adjoint)
                if adjoints[parent] is None:
                    adjoints[parent] = contribution
                else:
                    adjoints[parent] = adjoints[parent] + contribution
        result = []
        for x in wrt:
            adjoint = adjoints[x.index]
            result.append(np.zeros_like(x.value) if adjoint is None else np.asarray(adjoint).reshape(x.value.shape))
        return result


def lift(tape, x):
    if isinstance(x, Variable):
        if x.tape is not tape:
            raise ValueError("cannot combine variables of different tapes")
        return x
    return None


class Variable:
    """An array value recorded on a `Tape`

    Supports the arithmetic operators with other variables of the same tape
    and with numpy arrays or scalars, which are treated as constants.
    """

    __slots__ = ("tape", "index", "value")

    # Make numpy defer mixed operations to the reflected methods below
    __array_ufunc__ = None

    def __init__(self, tape, index, value):
        self.tape  = tape
        self.index = index
        self.value = value

    def __repr__(self):
        """Return a canonical representation of the variable"""
        return f"Variable(index={self.index!r}, value={self.value!r})"

    def __len__(self):
        """Return the length of the first axis"""
        return len(self.value)

    @property
    def shape(self):
        """The shape of the value"""
        return self.value.shape

    @property
    def ndim(self):
        """The number of dimensions of the value"""
        return self.value.ndim

    @property
    def T(self):
        """The transposed variable"""
        return self.tape.record(self.value.T, ((self, lambda g: g.T),))

    def __add__(self, other):
        """Return element-wise `a + b`"""
        b = lift(self.tape, other)
        if b is None:
            shape = self.shape
            return self.tape.record(self.value + other, ((self, lambda g: unbroadcast(g, shape)),))
        sa, sb = self.shape, b.shape
        return self.tape.record(
            self.value + b.value,
            ((self, lambda g: unbroadcast(g, sa)), (b, lambda g: unbroadcast(g, sb))),
        )

    def __radd__(self, other):
        """Return element-wise `b + a`"""
        return self.__add__(other)

    def __sub__(self, other):
        """Return element-wise `a - b`"""
        b = lift(self.tape, other)
        if b is None:
            shape = self.shape
            return self.tape.record(self.value - other, ((self, lambda g: unbroadcast(g, shape)),))
        sa, sb = self.shape, b.shape
        return self.tape.record(
            self.value - b.value,
            ((self, lambda g: unbroadcast(g, sa)), (b, lambda g: unbroadcast(-g, sb))),
        )

    def __rsub__(self, other):
        """Return element-wise `b - a`"""
        shape = self.shape
        return self.tape.record(other - self.value, ((self, lambda g: unbroadcast(-g, shape)),))

    def __mul__(self, other):
        """Return element-wise `a * b`"""
        b = lift(self.tape, other)
        a = self.value
        if b is None:
            shape = self.shape
            return self.tape.record(a * other, ((self, lambda g: unbroadcast(g * other, shape)),))
        bv = b.value
        return self.tape.record(
            a * bv,
            ((self, lambda g: unbroadcast(g * bv, a.shape)), (b, lambda g: unbroadcast(g * a, bv.shape))),
        )

    def __rmul__(self, other):
        """Return element-wise `b * a`"""
        return self.__mul__(other)

    def __truediv__(self, other):
        """Return element-wise `a / b`"""
        b = lift(self.tape, other)
        a = self.value
        if b is None:
            shape = self.shape
            return self.tape.record(a / other, ((self, lambda g: unbroadcast(g / other, shape)),))
        bv = b.value
        y = a / bv
        return self.tape.record(
            y,
            ((self, lambda g: unbroadcast(g / bv, a.shape)), (b, lambda g: unbroadcast(-g * y / bv, bv.shape))),
        )

    def __rtruediv__(self, other):
        """Return element-wise `b / a`"""
        a = self.value
        y = other / a
        return self.tape.record(y, ((self, lambda g: unbroadcast(-g * y / a, a.shape)),))

    def __pow__(self, other):
        """Return element-wise `a ** b` for a constant exponent `b`"""
        if isinstance(other, Variable):
            return NotImplemented
        a = self.value
        n = float(other)
        if n == 0:
            return self.tape.record(np.ones_like(a), ((self, lambda g: np.zeros_like(a)),))
        return self.tape.record(a ** n, ((self, lambda g: g * n * a ** (n - 1.0)),))

    def __matmul__(self, other):
        """Return the matrix product `a @ b`"""
        b = lift(self.tape, other)
        a = self.value
        if b is None:
            return self.tape.record(a @ other, ((self, lambda g: g @ np.swapaxes(other, -1, -2)),))
        bv = b.value
        return self.tape.record(
            a @ bv,
            ((self, lambda g: g @ bv.T), (b, lambda g: a.T @ g)),
        )

    def __rmatmul__(self, other):
        """Return the matrix product `b @ a`"""
        a = self.value
        return self.tape.record(other @ a, ((self, lambda g: np.swapaxes(other, -1, -2) @ g),))

    def __neg__(self):
        """Return element-wise `-a`"""
        return self.tape.record(-self.value, ((self, lambda g: -g),))

    def __pos__(self):
        """Return element-wise `+a`"""
        return self

    def __abs__(self):
        """Return element-wise `abs(a)`"""
        return absolute(self)

    def __getitem__(self, key):
        """Return the sub-array corresponding to `key`"""
        a = self.value

        def vjp(g):
            result = np.zeros_like(a)
            np.add.at(result, key, g)
            return result

        return self.tape.record(a[key], ((self, vjp),))

    def sum(self, axis=None):
        """Return the sum over `axis` (all axes by default)"""
        a = self.value

        def vjp(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, a.shape).copy()

        return self.tape.record(np.sum(a, axis=axis), ((self, vjp),))

    def mean(self, axis=None):
        """Return the mean over `axis` (all axes by default)"""
        count = self.value.size if axis is None else self.value.shape[axis]
        return self.sum(axis=axis) / count


def unary(x, value, derivative):
    # Record `value` with local derivative `derivative` if `x` is a variable
    if isinstance(x, Variable):
        return x.tape.record(value, ((x, lambda g: g * derivative),))
    return value


def tanh(x):
    """Return element-wise `tanh(x)`"""
    y = np.tanh(value_of(x))
    return unary(x, y, 1.0 - y * y)


def exp(x):
    """Return element-wise `exp(x)`"""
    y = np.exp(value_of(x))
    return unary(x, y, y)


def log(x):
    """Return element-wise `log(x)`"""
    a = value_of(x)
    return unary(x, np.log(a), 1.0 / a)


def sqrt(x):
    """Return element-wise `sqrt(x)`"""
    y = np.sqrt(value_of(x))
    return unary(x, y, 0.5 / y)


def softplus(x):
    """Return element-wise `log(1 + exp(x))`, evaluated without overflow"""
    a = value_of(x)
    return unary(x, np.logaddexp(0.0, a), expit(a))


def sigmoid(x):
    """Return element-wise `1 / (1 + exp(-x))`"""
    y = expit(value_of(x))
    return unary(x, y, y * (1.0 - y))


def absolute(x):
    """Return element-wise `abs(x)`

    The derivative at zero is taken as zero.
    """
    a = value_of(x)
    return unary(x, np.abs(a), np.sign(a))


def square(x):
    """Return element-wise `x * x`"""
    a = value_of(x)
    return unary(x, a * a, 2.0 * a)
