"""Adam optimizer over named parameter arrays."""

import numpy as np


def adam_step(param, grad, m, v, t, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, in place on param/m/v."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Keeps first/second moments per parameter name plus a step counter."""

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.moments = {}

    def step(self, params, grads, lr):
        """Update every param that received a gradient this pass."""
        self.t += 1
        for name, grad in grads.items():
            if grad is None:
                continue
            param = params[name]
            if name not in self.moments:
                self.moments[name] = (np.zeros_like(param), np.zeros_like(param))
            m, v = self.moments[name]
            adam_step(param, grad, m, v, self.t, lr,
                      self.beta1, self.beta2, self.eps)

    def state_arrays(self):
        """Flat name->array view of the moments, for checkpointing."""
        out = {}
        for name, (m, v) in self.moments.items():
            out[f"adam.m.{name}"] = m
            out[f"adam.v.{name}"] = v
        return out

    @classmethod
    def from_state(cls, arrays, t, beta1=0.9, beta2=0.999, eps=1e-8):
        opt = cls(beta1, beta2, eps)
        opt.t = t
        names = {k[len("adam.m."):] for k in arrays if k.startswith("adam.m.")}
        for name in names:
            opt.moments[name] = (arrays[f"adam.m.{name}"],
                                 arrays[f"adam.v.{name}"])
        return opt
