"""Pure-Python global-order witness search.

Given one candidate execution with a fixed reads-from choice, enumerate every
global total order of its memory events that respects the preserved program
order and the load-value rule, and collect the distinct final-memory
signatures (the order-maximal store per address).  This is the hot inner loop
of the axiomatic engine; memodel._order_search_c is the compiled twin with
identical semantics.

Event encoding (indices 0..n-1, n <= word size):

* preds[i]   - bitmask of events that must come earlier in the order
* is_store[i] - 1 for stores, 0 for loads
* addrs[i]   - dense address id
* srcs[i]    - for loads, the index of the store read, or -1 for the initial
               value; unused for stores
* po_vis[i]  - for loads, bitmask of same-address stores earlier in the same
               thread (visible through program order regardless of the global
               order); unused for stores

Initial-value stores are implicit and sit before every explicit event, so the
search only orders the explicit memory events.  A load's source must be
visible (in po_vis or already placed) and must not be overshadowed by another
visible same-address store placed after it; both conditions are checked
incrementally while the order is built, which prunes the search and is
equivalent to the load-value rule on the completed order.
"""

from __future__ import annotations

BACKEND = "python"


def order_outcomes(n, preds, is_store, addrs, srcs, po_vis, naddr):
    """Return the set of final-store tuples over all valid total orders.

    Each result is a tuple of length ``naddr`` giving, per address, the index
    of the order-maximal store, or -1 if no store to that address exists.
    """
    if n == 0:
        return {(-1,) * naddr}
    results = set()
    all_mask = (1 << n) - 1
    last_store = [-1] * naddr
    placed_loads: list[int] = []

    def dfs(placed_mask):
        if placed_mask == all_mask:
            results.add(tuple(last_store))
            return
        for i in range(n):
            bit = 1 << i
            if placed_mask & bit or preds[i] & ~placed_mask:
                continue
            a = addrs[i]
            if is_store[i]:
                ok = True
                for ld in placed_loads:
                    # i becomes visible to ld through program order and would
                    # overshadow ld's already-placed source
                    if addrs[ld] == a and (po_vis[ld] >> i) & 1:
                        s = srcs[ld]
                        if s < 0 or (s != i and (placed_mask >> s) & 1):
                            ok = False
                            break
                if not ok:
                    continue
                prev = last_store[a]
                last_store[a] = i
                dfs(placed_mask | bit)
                last_store[a] = prev
            else:
                s = srcs[i]
                if s < 0:
                    # reads the initial value: no same-address store may be
                    # visible, now or ever
                    if po_vis[i] or last_store[a] != -1:
                        continue
                else:
                    s_placed = (placed_mask >> s) & 1
                    if not s_placed and not ((po_vis[i] >> s) & 1):
                        continue  # source will never be visible
                    if s_placed and last_store[a] != s:
                        continue  # source already overshadowed
                placed_loads.append(i)
                dfs(placed_mask | bit)
                placed_loads.pop()

    dfs(0)
    return results
