"""Recurrent and dense layers with hand-written reverse-mode gradients.

Parameters live in plain dicts of float arrays; every layer exposes
``param_shapes`` (name -> shape), ``init`` (seeded draw), ``forward``
(returns output + cache) and ``backward`` (returns input gradient + a
gradient per parameter).  Gate packing along the last axis is (i, f, g, o):
input, forget, cell candidate, output.

Initialization: input kernels use Glorot-style uniform limits
sqrt(6 / (fan_in + fan_out)); recurrent kernels use a scaled uniform with
limit sqrt(3 / hidden); biases start at zero except the forget gate, which
starts at +1 so early training does not flush cell state.
"""

import numpy as np

from ..errors import ValidationError

PAD_MODES = ("zero", "periodic")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # stable in both tails
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _glorot(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _recurrent_uniform(rng: np.random.Generator, shape: tuple, hidden: int) -> np.ndarray:
    limit = np.sqrt(3.0 / hidden)
    return rng.uniform(-limit, limit, size=shape)


def _gate_bias(hidden: int) -> np.ndarray:
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0  # forget-gate slice of the (i, f, g, o) packing
    return b


class DenseLayer:
    """Time-distributed affine map on the trailing feature axis."""

    def __init__(self, name: str, in_features: int, out_features: int):
        self.name = name
        self.in_features = in_features
        self.out_features = out_features

    def param_shapes(self) -> dict:
        return {f"{self.name}.W": (self.in_features, self.out_features),
                f"{self.name}.b": (self.out_features,)}

    def init(self, rng: np.random.Generator) -> dict:
        return {f"{self.name}.W": _glorot(rng, (self.in_features, self.out_features),
                                          self.in_features, self.out_features),
                f"{self.name}.b": np.zeros(self.out_features)}

    def forward(self, params: dict, x: np.ndarray):
        y = x @ params[f"{self.name}.W"] + params[f"{self.name}.b"]
        return y, x

    def backward(self, params: dict, cache, dy: np.ndarray):
        x = cache
        w = params[f"{self.name}.W"]
        flat_x = x.reshape(-1, self.in_features)
        flat_dy = dy.reshape(-1, self.out_features)
        grads = {f"{self.name}.W": flat_x.T @ flat_dy,
                 f"{self.name}.b": flat_dy.sum(axis=0)}
        return dy @ w.T, grads


class LstmLayer:
    """Standard LSTM over (samples, steps, features) with h0 = c0 = 0."""

    def __init__(self, name: str, in_features: int, hidden: int):
        self.name = name
        self.in_features = in_features
        self.hidden = hidden

    def param_shapes(self) -> dict:
        return {f"{self.name}.W": (self.in_features, 4 * self.hidden),
                f"{self.name}.U": (self.hidden, 4 * self.hidden),
                f"{self.name}.b": (4 * self.hidden,)}

    def init(self, rng: np.random.Generator) -> dict:
        return {f"{self.name}.W": _glorot(rng, (self.in_features, 4 * self.hidden),
                                          self.in_features, 4 * self.hidden),
                f"{self.name}.U": _recurrent_uniform(rng, (self.hidden, 4 * self.hidden),
                                                     self.hidden),
                f"{self.name}.b": _gate_bias(self.hidden)}

    def forward(self, params: dict, x: np.ndarray):
        if x.ndim != 3 or x.shape[2] != self.in_features:
            raise ValidationError(
                f"{self.name}: expected (S, P, {self.in_features}) input, got {x.shape}"
            )
        w = params[f"{self.name}.W"]
        u = params[f"{self.name}.U"]
        b = params[f"{self.name}.b"]
        s, p, _ = x.shape
        hd = self.hidden
        gates = np.empty((p, s, 4 * hd), dtype=x.dtype)
        cells = np.empty((p, s, hd), dtype=x.dtype)
        hidden = np.empty((p, s, hd), dtype=x.dtype)
        h = np.zeros((s, hd), dtype=x.dtype)
        c = np.zeros((s, hd), dtype=x.dtype)
        for t in range(p):
            z = x[:, t] @ w + h @ u + b
            i = _sigmoid(z[:, :hd])
            f = _sigmoid(z[:, hd : 2 * hd])
            g = np.tanh(z[:, 2 * hd : 3 * hd])
            o = _sigmoid(z[:, 3 * hd :])
            c = f * c + i * g
            h = o * np.tanh(c)
            gates[t] = np.concatenate([i, f, g, o], axis=1)
            cells[t] = c
            hidden[t] = h
        y = hidden.transpose(1, 0, 2)
        return y, (x, gates, cells, hidden)

    def backward(self, params: dict, cache, dy: np.ndarray):
        x, gates, cells, hidden = cache
        w = params[f"{self.name}.W"]
        u = params[f"{self.name}.U"]
        s, p, _ = x.shape
        hd = self.hidden
        dw = np.zeros_like(w)
        du = np.zeros_like(u)
        db = np.zeros_like(params[f"{self.name}.b"])
        dx = np.empty_like(x)
        dh_next = np.zeros((s, hd), dtype=x.dtype)
        dc_next = np.zeros((s, hd), dtype=x.dtype)
        for t in range(p - 1, -1, -1):
            i = gates[t][:, :hd]
            f = gates[t][:, hd : 2 * hd]
            g = gates[t][:, 2 * hd : 3 * hd]
            o = gates[t][:, 3 * hd :]
            c = cells[t]
            c_prev = cells[t - 1] if t > 0 else np.zeros_like(c)
            h_prev = hidden[t - 1] if t > 0 else np.zeros((s, hd), dtype=x.dtype)
            tc = np.tanh(c)
            dh = dy[:, t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            dz = np.concatenate(
                [di * i * (1.0 - i), df * f * (1.0 - f),
                 dg * (1.0 - g * g), do * o * (1.0 - o)], axis=1)
            dw += x[:, t].T @ dz
            du += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, t] = dz @ w.T
            dh_next = dz @ u.T
        grads = {f"{self.name}.W": dw, f"{self.name}.U": du, f"{self.name}.b": db}
        return dx, grads


def _pad_spatial(x: np.ndarray, pad: int, mode: str) -> np.ndarray:
    # x: (..., N, C); pad along the spatial axis
    width = [(0, 0)] * x.ndim
    width[-2] = (pad, pad)
    if mode == "zero":
        return np.pad(x, width)
    return np.pad(x, width, mode="wrap")


def _conv_windows(x: np.ndarray, kernel: int, mode: str) -> np.ndarray:
    """(S, N, C) -> (S, N, kernel*C) im2col windows under 'same' padding."""
    pad = kernel // 2
    xp = _pad_spatial(x, pad, mode)
    n = x.shape[-2]
    cols = [xp[:, j : j + n] for j in range(kernel)]
    return np.concatenate(cols, axis=-1)


def _conv_scatter(d_windows: np.ndarray, kernel: int, n: int, channels: int,
                  mode: str) -> np.ndarray:
    """Adjoint of _conv_windows: (S, N, kernel*C) -> (S, N, C)."""
    pad = kernel // 2
    s = d_windows.shape[0]
    dxp = np.zeros((s, n + 2 * pad, channels), dtype=d_windows.dtype)
    for j in range(kernel):
        dxp[:, j : j + n] += d_windows[..., j * channels : (j + 1) * channels]
    if mode == "zero":
        return dxp[:, pad : pad + n]
    dx = dxp[:, pad : pad + n].copy()
    if pad:
        dx[:, :pad] += dxp[:, n + pad :]
        dx[:, n - pad :] += dxp[:, :pad]
    return dx


class ConvLstmLayer:
    """LSTM whose matrix products are 1-D 'same' convolutions over space.

    Shapes: input (S, P, N, F) -> output (S, P, N, H); parameters are
    independent of N, so a trained layer applies at any spatial size.
    Conv windows are rebuilt during backward instead of cached, keeping
    memory at a few state arrays per layer.
    """

    def __init__(self, name: str, in_features: int, hidden: int, kernel: int = 3,
                 padding: str = "zero"):
        if kernel < 1 or kernel % 2 == 0:
            raise ValidationError(f"kernel size must be odd and positive, got {kernel}")
        if padding not in PAD_MODES:
            raise ValidationError(f"padding must be one of {PAD_MODES}, got {padding!r}")
        self.name = name
        self.in_features = in_features
        self.hidden = hidden
        self.kernel = kernel
        self.padding = padding

    def param_shapes(self) -> dict:
        return {f"{self.name}.W": (self.kernel * self.in_features, 4 * self.hidden),
                f"{self.name}.U": (self.kernel * self.hidden, 4 * self.hidden),
                f"{self.name}.b": (4 * self.hidden,)}

    def init(self, rng: np.random.Generator) -> dict:
        fan_in = self.kernel * self.in_features
        return {f"{self.name}.W": _glorot(rng, (fan_in, 4 * self.hidden),
                                          fan_in, 4 * self.hidden),
                f"{self.name}.U": _recurrent_uniform(
                    rng, (self.kernel * self.hidden, 4 * self.hidden), self.hidden),
                f"{self.name}.b": _gate_bias(self.hidden)}

    def forward(self, params: dict, x: np.ndarray):
        if x.ndim != 4 or x.shape[3] != self.in_features:
            raise ValidationError(
                f"{self.name}: expected (S, P, N, {self.in_features}) input, got {x.shape}"
            )
        w = params[f"{self.name}.W"]
        u = params[f"{self.name}.U"]
        b = params[f"{self.name}.b"]
        s, p, n, _ = x.shape
        hd = self.hidden
        gates = np.empty((p, s, n, 4 * hd), dtype=x.dtype)
        cells = np.empty((p, s, n, hd), dtype=x.dtype)
        hidden = np.empty((p, s, n, hd), dtype=x.dtype)
        h = np.zeros((s, n, hd), dtype=x.dtype)
        c = np.zeros((s, n, hd), dtype=x.dtype)
        for t in range(p):
            z = (_conv_windows(x[:, t], self.kernel, self.padding) @ w
                 + _conv_windows(h, self.kernel, self.padding) @ u + b)
            i = _sigmoid(z[..., :hd])
            f = _sigmoid(z[..., hd : 2 * hd])
            g = np.tanh(z[..., 2 * hd : 3 * hd])
            o = _sigmoid(z[..., 3 * hd :])
            c = f * c + i * g
            h = o * np.tanh(c)
            gates[t] = np.concatenate([i, f, g, o], axis=-1)
            cells[t] = c
            hidden[t] = h
        y = hidden.transpose(1, 0, 2, 3)
        return y, (x, gates, cells, hidden)

    def backward(self, params: dict, cache, dy: np.ndarray):
        x, gates, cells, hidden = cache
        w = params[f"{self.name}.W"]
        u = params[f"{self.name}.U"]
        s, p, n, _ = x.shape
        hd = self.hidden
        dw = np.zeros_like(w)
        du = np.zeros_like(u)
        db = np.zeros_like(params[f"{self.name}.b"])
        dx = np.empty_like(x)
        dh_next = np.zeros((s, n, hd), dtype=x.dtype)
        dc_next = np.zeros((s, n, hd), dtype=x.dtype)
        for t in range(p - 1, -1, -1):
            i = gates[t][..., :hd]
            f = gates[t][..., hd : 2 * hd]
            g = gates[t][..., 2 * hd : 3 * hd]
            o = gates[t][..., 3 * hd :]
            c = cells[t]
            c_prev = cells[t - 1] if t > 0 else np.zeros_like(c)
            h_prev = hidden[t - 1] if t > 0 else np.zeros((s, n, hd), dtype=x.dtype)
            tc = np.tanh(c)
            dh = dy[:, t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            dz = np.concatenate(
                [di * i * (1.0 - i), df * f * (1.0 - f),
                 dg * (1.0 - g * g), do * o * (1.0 - o)], axis=-1)
            flat_dz = dz.reshape(-1, 4 * hd)
            x_win = _conv_windows(x[:, t], self.kernel, self.padding)
            h_win = _conv_windows(h_prev, self.kernel, self.padding)
            dw += x_win.reshape(-1, w.shape[0]).T @ flat_dz
            du += h_win.reshape(-1, u.shape[0]).T @ flat_dz
            db += flat_dz.sum(axis=0)
            dx[:, t] = _conv_scatter(dz @ w.T, self.kernel, n, self.in_features,
                                     self.padding)
            dh_next = _conv_scatter(dz @ u.T, self.kernel, n, hd, self.padding)
        grads = {f"{self.name}.W": dw, f"{self.name}.U": du, f"{self.name}.b": db}
        return dx, grads


class GlobalMaxPool:
    """Max over the spatial axis of (S, P, N, K); ties route to lowest index."""

    def __init__(self, name: str = "pool"):
        self.name = name

    def param_shapes(self) -> dict:
        return {}

    def init(self, rng: np.random.Generator) -> dict:
        return {}

    def forward(self, params: dict, x: np.ndarray):
        if x.ndim != 4:
            raise ValidationError(f"{self.name}: expected (S, P, N, K), got {x.shape}")
        idx = np.argmax(x, axis=2)  # first occurrence wins ties
        y = np.take_along_axis(x, idx[:, :, None, :], axis=2)[:, :, 0, :]
        return y, (x.shape, idx, x.dtype)

    def backward(self, params: dict, cache, dy: np.ndarray):
        shape, idx, dtype = cache
        dx = np.zeros(shape, dtype=dtype)
        np.put_along_axis(dx, idx[:, :, None, :], dy[:, :, None, :], axis=2)
        return dx, {}
