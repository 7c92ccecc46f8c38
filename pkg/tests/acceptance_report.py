"""Shared record of acceptance outcomes, printed at the end of the session."""

RESULTS = {}


def report(num, ok, detail):
    RESULTS[num] = (bool(ok), detail)
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return bool(ok)
