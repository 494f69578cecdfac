# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twin of the global-order witness search.

Same contract as memodel._order_search_py.order_outcomes; see that module
for the event encoding and the incremental load-value pruning argument.
Events are capped well below the mask width, so bitmasks live in one
unsigned 64-bit word.
"""

BACKEND = "c"

DEF MAXN = 32


cdef void _dfs(unsigned long long placed, unsigned long long all_mask,
               int n, int naddr,
               unsigned long long *preds, int *is_store, int *addrs,
               int *srcs, unsigned long long *po_vis,
               int *last_store, int *placed_loads, int n_loads,
               set results):
    cdef int i, k, a, s, ld, prev, ok
    cdef unsigned long long bit
    if placed == all_mask:
        results.add(tuple([last_store[k] for k in range(naddr)]))
        return
    for i in range(n):
        bit = 1ULL << i
        if placed & bit or preds[i] & ~placed:
            continue
        a = addrs[i]
        if is_store[i]:
            ok = 1
            for k in range(n_loads):
                ld = placed_loads[k]
                if addrs[ld] == a and (po_vis[ld] >> i) & 1ULL:
                    s = srcs[ld]
                    if s < 0 or (s != i and (placed >> s) & 1ULL):
                        ok = 0
                        break
            if not ok:
                continue
            prev = last_store[a]
            last_store[a] = i
            _dfs(placed | bit, all_mask, n, naddr, preds, is_store, addrs,
                 srcs, po_vis, last_store, placed_loads, n_loads, results)
            last_store[a] = prev
        else:
            s = srcs[i]
            if s < 0:
                if po_vis[i] or last_store[a] != -1:
                    continue
            else:
                if not (placed >> s) & 1ULL:
                    if not (po_vis[i] >> s) & 1ULL:
                        continue
                elif last_store[a] != s:
                    continue
            placed_loads[n_loads] = i
            _dfs(placed | bit, all_mask, n, naddr, preds, is_store, addrs,
                 srcs, po_vis, last_store, placed_loads, n_loads + 1, results)


def order_outcomes(n, preds, is_store, addrs, srcs, po_vis, naddr):
    """Set of final-store tuples over all valid total orders (see the
    pure-Python twin for the full contract)."""
    cdef int c_n = n
    cdef int c_naddr = naddr
    if c_n == 0:
        return {(-1,) * naddr}
    if c_n >= MAXN or c_naddr >= MAXN:
        raise ValueError(f"order search supports fewer than {MAXN} events")
    cdef unsigned long long c_preds[MAXN]
    cdef unsigned long long c_vis[MAXN]
    cdef int c_store[MAXN]
    cdef int c_addr[MAXN]
    cdef int c_src[MAXN]
    cdef int c_last[MAXN]
    cdef int c_loads[MAXN]
    cdef int i
    for i in range(c_n):
        c_preds[i] = preds[i]
        c_vis[i] = po_vis[i]
        c_store[i] = is_store[i]
        c_addr[i] = addrs[i]
        c_src[i] = srcs[i]
    for i in range(c_naddr):
        c_last[i] = -1
    results = set()
    _dfs(0, (1ULL << c_n) - 1, c_n, c_naddr, c_preds, c_store, c_addr,
         c_src, c_vis, c_last, c_loads, 0, results)
    return results
