"""Independent brute-force references used by the tests.

Nothing here imports the layout arithmetic from the package.
"""

TAG = object()


def insertion_image(n, t, f):
    """Physical image built word by word: a marker after data word f-1, f-1+t, ..."""
    out = []
    for k in range(n):
        out.append(k)
        seen = k + 1
        if seen == f or (seen > f and (seen - f) % t == 0):
            out.append(TAG)
    return out


def brute_interleave(data, t, f, tag):
    return [tag if x is TAG else data[x] for x in insertion_image(len(data), t, f)]


def brute_tag_positions(n, t, f, base=0):
    return [base + i for i, x in enumerate(insertion_image(n, t, f)) if x is TAG]


def brute_physical(k, t, f, base=0):
    image = insertion_image(k + 1, t, f)
    return base + image.index(k)


def brute_worst_case_leak(events, n_in, t):
    """Stored words before the first load that reads a data word followed by a tag.

    With f = t the tag-carrying data words are t-1, 2t-1, ...; the whole
    input is corrupted so any such word in a load is fatal.
    """
    tagged = {k for k in range(n_in) if (k + 1) % t == 0}
    stored = 0
    for ev in events:
        if ev.is_store:
            stored += ev.length
        elif any(k in tagged for k in range(ev.start, ev.start + ev.length)):
            return stored, True
    return stored, False
