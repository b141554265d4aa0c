# A walk through the tensor core: build a tiny computation, record it on a
# gradient tape, and confirm the replayed gradients against finite
# differences by hand.

import numpy as np

from tempconv import GradTape, Tensor, ops

# Leaf tensors are plain numpy arrays with a requires_grad mark. Everything
# stays channels-first: (batch, channels, time).
rng = np.random.default_rng(0)
x = Tensor(rng.standard_normal((1, 2, 6)), requires_grad=True)
w = Tensor(rng.standard_normal((3, 2, 3)), requires_grad=True)

# A causal conv spec: left-pad (k-1)*dilation zeros so output t only sees
# inputs <= t and the length is preserved.
spec = ops.ConvSpec(in_channels=2, out_channels=3, kernel=(3,), dilation=(2,),
                    causal=True)

with GradTape() as tape:
    y = ops.conv(x, w, None, spec)     # (1, 3, 6)
    z = ops.relu(y)
    loss = ops.tensor_mean(z)
print("loss:", float(loss.data))

# backward replays the tape in reverse execution order and accumulates into
# each leaf's .grad
grads = tape.backward(loss)
print("gradient shapes:", {id(k) == id(w): v.shape for k, v in grads.items()})

# spot-check the most active weight coordinate against a central difference
h = 1e-6
probe = np.unravel_index(np.argmax(np.abs(w.grad)), w.grad.shape)


def loss_at(wval):
    wt = Tensor(wval)
    y2 = ops.conv(Tensor(x.data), wt, None, spec)
    return float(ops.tensor_mean(ops.relu(y2)).data)


wp = w.data.copy(); wp[probe] += h
wm = w.data.copy(); wm[probe] -= h
numeric = (loss_at(wp) - loss_at(wm)) / (2 * h)
analytic = w.grad[probe]
print(f"analytic {analytic:+.8f}  numeric {numeric:+.8f}  "
      f"delta {abs(analytic - numeric):.2e}")

# gradients accumulate across backward calls until cleared
before = x.grad.copy()
with GradTape() as tape2:
    loss2 = ops.tensor_mean(ops.relu(ops.conv(x, w, None, spec)))
tape2.backward(loss2)
print("accumulation doubles the gradient:",
      np.allclose(x.grad, 2 * before))

# a tape refuses to differentiate through ops it never saw
try:
    stray = ops.relu(x)                      # recorded nowhere
    with GradTape() as tape3:
        bad = ops.tensor_mean(stray)         # tape3 starts mid-graph
    tape3.backward(bad)
except Exception as exc:
    print("tape gap detected:", type(exc).__name__)
