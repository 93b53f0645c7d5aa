#!/usr/bin/env python3
"""
Checkpoint Inspector Script
Show the metadata and tensors stored in an autoencoder or classifier checkpoint
"""

import json
import os
import sys

import numpy as np
from dotenv import load_dotenv

# Add the project root to the Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)


def inspect(path: str, show_values: int = 0, reconstruct=()):
    """Print the metadata and a per-tensor summary of one checkpoint"""
    from src.models.checkpoint import load_checkpoint

    meta, state = load_checkpoint(path)
    print(f'\n=== Checkpoint: {path} ===')
    print(f'Kind:           {meta["model_kind"]}')
    print(f'Format version: {meta["format_version"]}')
    print('Hyperparameters:')
    print(json.dumps(meta["hyperparameters"], indent=4, sort_keys=True))

    print(f'\nTensors ({len(state)} total)')
    print('-' * 72)
    total = 0
    for name in sorted(state):
        array = state[name]
        total += array.size
        print(f'{name:<36} {str(array.shape):<16} norm={np.linalg.norm(array):10.4f}')
        if show_values:
            print(f'    {np.array2string(array.ravel()[:show_values], precision=4)}')
    print('-' * 72)
    print(f'Parameters: {total}')

    if reconstruct and meta["model_kind"] == "autoencoder":
        _reconstruct(path, reconstruct)


def _reconstruct(path: str, strings):
    """Reconstruct a few strings with the loaded codec"""
    from src.metrics.strings import render_diff
    from src.models.autoencoder import StringAutoencoder, character_accuracy

    codec = StringAutoencoder.load(path)
    print('\nReconstructions:')
    for original, decoded in zip(strings, codec.reconstruct(list(strings))):
        left, right = render_diff(original, decoded)
        print(f'  {left}')
        print(f'  {right}   (accuracy {character_accuracy(original, decoded):.2%})')


def main():
    """Main function"""
    import argparse

    parser = argparse.ArgumentParser(description='Inspect a model checkpoint')
    parser.add_argument('checkpoint', help='Path to a .npz checkpoint')
    parser.add_argument('--values', type=int, default=0, help='Print the first N values of each tensor')
    parser.add_argument('--reconstruct', nargs='+', default=[],
                        help='Strings to reconstruct when the checkpoint is an autoencoder')

    args = parser.parse_args()
    load_dotenv()

    from src.errors import AdvStringsError

    try:
        inspect(args.checkpoint, args.values, args.reconstruct)
    except AdvStringsError as e:
        print(f'Error inspecting checkpoint: {e}')
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
