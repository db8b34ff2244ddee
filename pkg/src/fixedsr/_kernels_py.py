"""Pure-Python kernels. Mirrors ``_kernels.pyx`` function for function.

Token ids follow the block layout of :class:`fixedsr.tokens.TokenTable`:
``t < nu`` is unary, ``nu <= t < nu + nb`` is binary, anything above is a leaf.
"""

import math

import numpy as np

BACKEND = "python"


def prefix_depth(tokens, nu, nb):
    """Return ``(depth, complete)`` for a prefix sequence.

    Incomplete sequences report the depth they have committed to, which
    includes the argument slots already opened by placed operators.
    """
    nop = nu + nb
    n = len(tokens)
    if n == 0:
        raise ValueError("empty token sequence")
    slots = [0]
    depth = 0
    for pos in range(n):
        if not slots:
            raise ValueError(f"token at position {pos} follows a complete expression")
        d = slots.pop()
        if d > depth:
            depth = d
        t = tokens[pos]
        if t < nu:
            slots.append(d + 1)
        elif t < nop:
            slots.append(d + 1)
            slots.append(d + 1)
    if slots:
        # open slots are non-decreasing bottom to top
        if slots[-1] > depth:
            depth = slots[-1]
        return depth, False
    return depth, True


def postfix_depth(tokens, nu, nb):
    """Return ``(depth, complete)`` for a postfix sequence (max over the stack)."""
    nop = nu + nb
    if len(tokens) == 0:
        raise ValueError("empty token sequence")
    stack = []
    for pos, t in enumerate(tokens):
        if t < nu:
            if not stack:
                raise ValueError(f"unary operator at position {pos} has no operand")
            stack[-1] += 1
        elif t < nop:
            if len(stack) < 2:
                raise ValueError(f"binary operator at position {pos} has fewer than two operands")
            b = stack.pop()
            a = stack[-1]
            stack[-1] = (a if a > b else b) + 1
        else:
            stack.append(0)
    return max(stack), len(stack) == 1


def postfix_fold(stack):
    """Minimum completed depth of a postfix stack of subtree depths.

    Binary operators can only join the top two entries, so the cheapest
    completion folds the stack from the top down.
    """
    if not stack:
        raise ValueError("empty stack")
    acc = stack[-1]
    for i in range(len(stack) - 2, -1, -1):
        d = stack[i]
        acc = (d if d > acc else acc) + 1
    return acc


def subtree_spans(tokens, nu, nb, postfix):
    """Span and depth of the subtree anchored at every index of a complete sequence.

    Returns three lists ``(starts, stops, depths)``; ``tokens[starts[i]:stops[i] + 1]``
    is the subtree rooted at ``tokens[i]``.
    """
    nop = nu + nb
    n = len(tokens)
    if n == 0:
        raise ValueError("empty token sequence")
    starts = [0] * n
    stops = [0] * n
    depths = [0] * n
    stack = []
    if postfix:
        for i in range(n):
            t = tokens[i]
            if t < nu:
                if not stack:
                    raise ValueError("incomplete expression")
                s, d = stack[-1]
                d += 1
                stack[-1] = (s, d)
            elif t < nop:
                if len(stack) < 2:
                    raise ValueError("incomplete expression")
                _, d2 = stack.pop()
                s, d1 = stack[-1]
                d = (d1 if d1 > d2 else d2) + 1
                stack[-1] = (s, d)
            else:
                s, d = i, 0
                stack.append((i, 0))
            starts[i] = s
            stops[i] = i
            depths[i] = d
    else:
        for i in range(n - 1, -1, -1):
            t = tokens[i]
            if t < nu:
                if not stack:
                    raise ValueError("incomplete expression")
                e, d = stack[-1]
                d += 1
                stack[-1] = (e, d)
            elif t < nop:
                if len(stack) < 2:
                    raise ValueError("incomplete expression")
                _, d1 = stack.pop()
                e, d2 = stack[-1]
                d = (d1 if d1 > d2 else d2) + 1
                stack[-1] = (e, d)
            else:
                e, d = i, 0
                stack.append((i, 0))
            starts[i] = i
            stops[i] = e
            depths[i] = d
    if len(stack) != 1:
        raise ValueError("incomplete expression")
    return starts, stops, depths


def _pick(u, n_un, n_bin, n_leaf, allow_bin, allow_un, allow_leaf, pos):
    count = 0
    if allow_un:
        count += n_un
    if allow_bin:
        count += n_bin
    if allow_leaf:
        count += n_leaf
    if count == 0:
        raise ValueError(f"no legal token at step {pos}")
    j = int(u * count)
    if j >= count:
        j = count - 1
    if allow_un:
        if j < n_un:
            return j
        j -= n_un
    if allow_bin:
        if j < n_bin:
            return n_un + j
        j -= n_bin
    return n_un + n_bin + j


def rollout_prefix(N, nu, nb, nl, u):
    """Draw one complete depth-``N`` prefix sequence consuming uniforms ``u``."""
    out = []
    slots = [0]
    placed = 0
    pos = 0
    while slots:
        d = slots[-1]
        ops_ok = d + 1 <= N
        leaf_ok = not (len(slots) == 1 and (placed if placed > d else d) < N)
        t = _pick(u[pos], nu, nb, nl, ops_ok and nb > 0, ops_ok and nu > 0, leaf_ok, pos)
        pos += 1
        slots.pop()
        if d > placed:
            placed = d
        if t < nu:
            slots.append(d + 1)
        elif t < nu + nb:
            slots.append(d + 1)
            slots.append(d + 1)
        out.append(t)
    return tuple(out)


def rollout_postfix(N, nu, nb, nl, u):
    """Draw one complete depth-``N`` postfix sequence consuming uniforms ``u``.

    ``pm[i]`` holds ``max_{j<=i}(stack[j] + j + 1)`` so the minimum completion
    depth after any candidate token is available in O(1).
    """
    out = []
    stack = []
    pm = []
    pos = 0
    while not (len(stack) == 1 and stack[0] == N):
        k = len(stack)
        if k == 0:
            leaf_ok, un_ok, bin_ok = True, False, False
        else:
            top = stack[-1]
            below = pm[k - 2] if k >= 2 else -1
            # leaf: new top at index k with depth 0
            mc_leaf = (below if below > top + k else top + k)
            mc_leaf = mc_leaf if mc_leaf > k else k
            leaf_ok = nb > 0 and mc_leaf <= N
            if k == 1:
                mc_un = top + 1
            else:
                mc_un = below if below > top + k else top + k
            un_ok = nu > 0 and mc_un <= N
            bin_ok = nb > 0 and k >= 2
        t = _pick(u[pos], nu, nb, nl, bin_ok, un_ok, leaf_ok, pos)
        pos += 1
        if t < nu:
            stack[-1] += 1
            pm.pop()
            v = stack[-1] + k
            pm.append(v if k == 1 or v > pm[-1] else pm[-1])
        elif t < nu + nb:
            b = stack.pop()
            pm.pop()
            a = stack[-1]
            stack[-1] = (a if a > b else b) + 1
            pm.pop()
            v = stack[-1] + k - 1
            pm.append(v if k == 2 or v > pm[-1] else pm[-1])
        else:
            stack.append(0)
            v = k + 1
            pm.append(v if k == 0 or v > pm[-1] else pm[-1])
        out.append(t)
    return tuple(out)


def _unary(op, a):
    if op == 0:
        return np.sin(a)
    if op == 1:
        return np.cos(a)
    if op == 2:
        return np.sqrt(a)
    if op == 3:
        return np.exp(a)
    if op == 4:
        return np.log(a)
    if op == 5:
        return np.tan(a)
    if op == 6:
        return -a
    if op == 7:
        return np.abs(a)
    raise ValueError(f"unknown unary opcode {op}")


def _binary(op, a, b):
    if op == 0:
        return a + b
    if op == 1:
        return a - b
    if op == 2:
        return a * b
    if op == 3:
        return a / b
    if op == 4:
        return np.power(a, b)
    raise ValueError(f"unknown binary opcode {op}")


def evaluate(tokens, kinds, args, cols, consts, postfix):
    """Evaluate a complete sequence column-wise.

    ``cols`` is the (D, n) transposed feature matrix; ``consts`` is indexed by
    left-to-right occurrence of the constant token.
    """
    n = cols.shape[1]
    ntok = len(tokens)
    nconst = 0
    for t in tokens:
        if kinds[t] == 3:
            nconst += 1
    if nconst != len(consts):
        raise ValueError(f"expected {nconst} constants, got {len(consts)}")
    stack = []
    order = range(ntok) if postfix else range(ntok - 1, -1, -1)
    ci = 0 if postfix else nconst - 1
    step = 1 if postfix else -1
    with np.errstate(all="ignore"):
        for i in order:
            t = tokens[i]
            k = kinds[t]
            if k == 2:
                stack.append(cols[args[t]])
            elif k == 3:
                stack.append(np.full(n, consts[ci], dtype=np.float64))
                ci += step
            elif k == 0:
                if not stack:
                    raise ValueError("stack underflow")
                stack[-1] = _unary(args[t], stack[-1])
            else:
                if len(stack) < 2:
                    raise ValueError("stack underflow")
                if postfix:
                    b = stack.pop()
                    a = stack[-1]
                else:
                    a = stack.pop()
                    b = stack[-1]
                stack[-1] = _binary(args[t], a, b)
    if len(stack) != 1:
        raise ValueError("incomplete expression")
    return np.array(stack[0], dtype=np.float64)


def fit_lm(tokens, kinds, args, cols, y, c0, iterations, lam0, factor, rel_step, postfix):
    """Levenberg-Marquardt on the constants; returns ``(consts, cost)``.

    ``cost`` is the squared residual norm (``inf`` if the seed is non-finite).
    Every attempted step counts as an iteration.
    """
    c = np.array(c0, dtype=np.float64)
    k = c.shape[0]
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != cols.shape[1]:
        raise ValueError("label length differs from row count")

    def resid(cv):
        r = evaluate(tokens, kinds, args, cols, cv, postfix) - y
        with np.errstate(all="ignore"):
            return r, float(np.dot(r, r))

    r, cost = resid(c)
    if math.isnan(cost):
        cost = math.inf
    if not math.isfinite(cost) or k == 0:
        return c, cost
    lam = lam0
    J = None
    for _ in range(iterations):
        if J is None:
            J = np.empty((k, cols.shape[1]))
            cj = c.copy()
            for i in range(k):
                ci = c[i]
                h = rel_step * max(1.0, abs(ci))
                cj[i] = ci + h
                up = evaluate(tokens, kinds, args, cols, cj, postfix)
                cj[i] = ci - h
                down = evaluate(tokens, kinds, args, cols, cj, postfix)
                cj[i] = ci
                with np.errstate(all="ignore"):
                    J[i] = (up - down) / (2.0 * h)
            with np.errstate(all="ignore"):
                JtJ = J @ J.T
                g = -(J @ r)
        if not (np.all(np.isfinite(JtJ)) and np.all(np.isfinite(g))):
            break
        try:
            delta = np.linalg.solve(JtJ + lam * np.eye(k), g)
        except np.linalg.LinAlgError:
            lam *= factor
            continue
        c_new = c + delta
        r_new, cost_new = resid(c_new)
        if math.isfinite(cost_new) and cost_new < cost:
            c, r, cost = c_new, r_new, cost_new
            lam /= factor
            J = None
        else:
            lam *= factor
    return c, cost
