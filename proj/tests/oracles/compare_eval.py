"""Runs `retro evaluate` and the reference scorer on the same files and
requires every reported number to agree to 4 decimal places.

usage: compare_eval.py RETRO_BINARY DATA.json PRED.json [DATA.json PRED.json ...]
"""
import json
import os
import subprocess
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))
KEYS = ['exact', 'f1', 'total', 'HasAns_exact', 'HasAns_f1', 'HasAns_total',
        'NoAns_exact', 'NoAns_f1', 'NoAns_total']


def main():
    binary, pairs = sys.argv[1], sys.argv[2:]
    failures = 0
    for data, pred in zip(pairs[::2], pairs[1::2]):
        ref = json.loads(subprocess.check_output(
            [sys.executable, os.path.join(HERE, 'squad_v2_eval.py'), data, pred]))
        with tempfile.TemporaryDirectory() as out:
            subprocess.check_call([binary, 'evaluate', '--data', data, '--pred', pred, '--out', out],
                                  stdout=subprocess.DEVNULL)
            with open(os.path.join(out, 'eval.json')) as f:
                got = json.load(f)
        for k in KEYS:
            if k not in ref and k not in got:
                continue
            ok = k in ref and k in got and round(ref[k], 4) == round(got[k], 4)
            print('%s %-14s reference=%s retro=%s' % ('ok  ' if ok else 'FAIL', k, ref.get(k), got.get(k)))
            failures += not ok
    sys.exit(1 if failures else 0)


if __name__ == '__main__':
    main()
