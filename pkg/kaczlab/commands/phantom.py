"""
phantom --q N --out FILE [--variant original|modified|kak_slaney]

Writes a q×q Shepp–Logan phantom as ASCII PGM (``.pgm``) or CSV (any other
suffix).
"""
import argparse
from pathlib import Path

from kaczlab.commands._base import Command
from kaczlab.models.problem import PhantomVariant
from kaczlab.services.exchange import write_image_csv, write_pgm
from kaczlab.services.tomography import shepp_logan_phantom


def _configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--q", type=int, required=True, help="image side length (>= 8)")
    parser.add_argument("--out", required=True)
    parser.add_argument("--variant", choices=[v.value for v in PhantomVariant], default=PhantomVariant.original.value)


def _handle(args: argparse.Namespace) -> int:
    image = shepp_logan_phantom(args.q, PhantomVariant(args.variant))
    out = Path(args.out)
    if out.suffix.lower() == ".pgm":
        write_pgm(out, image)
    else:
        write_image_csv(out, image.pixels)
    print(f"{args.q}x{args.q} phantom written to {out}")
    return 0


command = Command("phantom", "write a Shepp-Logan phantom image", _configure, _handle)
