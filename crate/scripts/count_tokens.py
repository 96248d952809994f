#!/usr/bin/env python3
"""Token counter for `diagbench stats --tokenizer`.

Reads a JSON array of strings on stdin and writes a JSON array of token
counts on stdout, using a Hugging Face tokenizer.

    diagbench stats out/stage1 --tokenizer "python3 scripts/count_tokens.py Qwen/Qwen2-VL-7B-Instruct"
"""

import json
import sys

from transformers import AutoTokenizer


def main() -> int:
    if len(sys.argv) != 2:
        print("usage: count_tokens.py TOKENIZER_NAME_OR_PATH", file=sys.stderr)
        return 2
    tokenizer = AutoTokenizer.from_pretrained(sys.argv[1])
    texts = json.load(sys.stdin)
    counts = [len(tokenizer.encode(t, add_special_tokens=False)) for t in texts]
    json.dump(counts, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
