"""Thin command-line client for the besovkit service.

Every command builds a JSON request and sends it through HTTP: against a
remote server when --server is given, otherwise against an in-process
instance of the FastAPI app (no network, deterministic).  Exit codes:
0 pass, 1 acceptance failure, 2 usage error.
"""

from __future__ import annotations

import math
import pathlib
import sys

import click

from .experiments import experiment_names

EXIT_FAIL = 1
EXIT_USAGE = 2


def _client(server: str | None):
    if server:
        import httpx
        return httpx.Client(base_url=server, timeout=600.0)
    from starlette.testclient import TestClient
    from .service import create_app
    return TestClient(create_app())


def _post(client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code == 404:
        raise click.UsageError(resp.json().get("detail", "not found"))
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        raise click.ClickException(f"service error: {detail}")
    return resp.json()


def _q_wire(value: str) -> float:
    """q over the wire: inf encodes as -1."""
    return -1.0 if value.strip().lower() in ("inf", "infinity") else float(value)


def _read(path: str) -> str:
    return pathlib.Path(path).read_text()


def _write(path: str, text: str):
    pathlib.Path(path).write_text(text)


server_option = click.option("--server", default=None,
                             help="Remote service URL (default: in-process)")


@click.group()
def main():
    """Numerical toolkit for Besov norms, Whitney extension, atomic
    decompositions, traces and pointwise multipliers."""


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn
    from .service import create_app
    uvicorn.run(create_app(), host=host, port=port)


@main.command()
@click.argument("name")
@click.option("--config", "config_path", default=None,
              help="Flat key=value config file")
@click.option("--seed", default=None, type=int)
@click.option("--out", "out_dir", default=".",
              help="Directory for the CSV artifacts")
@click.option("--parallel", is_flag=True,
              help="Enable per-suite parallelism where safe "
                   "(BESOVKIT_THREADS caps workers)")
@server_option
def run(name, config_path, seed, out_dir, parallel, server):
    """Run a named experiment suite and write its CSV artifact."""
    if name not in experiment_names():
        raise click.UsageError(
            f"unknown experiment {name!r}; known: "
            + ", ".join(experiment_names()))
    config = {}
    if config_path:
        from .experiments import parse_config
        config = parse_config(_read(config_path))
    with _client(server) as client:
        data = _post(client, f"/experiments/{name}",
                     {"config": config, "seed": seed, "parallel": parallel})
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / f"{name}.csv", data["csv"])
    if data.get("plot_data"):
        _write(out / f"{name}_plot.dat", data["plot_data"])
    click.echo(data["summary"])
    sys.exit(0 if data["passed"] else EXIT_FAIL)


@main.command()
@click.option("--domain", "domain_path", required=True)
@click.option("--jmax", required=True, type=int)
@click.option("--gamma", default=13.0, type=float)
@click.option("--out", "out_path", required=True)
@server_option
def whitney(domain_path, jmax, gamma, out_path, server):
    """Whitney-decompose a domain file; write the cover dump."""
    with _client(server) as client:
        data = _post(client, "/whitney/decompose",
                     {"domain_text": _read(domain_path), "j_max": jmax,
                      "gamma": gamma})
    _write(out_path, data["cover_text"])
    click.echo(f"{data['n_cubes']} cubes, {data['n_collar']} collar cells")


@main.group()
def atoms():
    """Atomic decompositions: decompose, reconstruct, reexpand."""


@atoms.command("decompose")
@click.option("--grid", "grid_path", required=True)
@click.option("--s", required=True, type=float)
@click.option("--p", required=True, type=float)
@click.option("--q", required=True)
@click.option("--r", default=1, type=int)
@click.option("--levels", default=4, type=int)
@click.option("--kind", default="Lip",
              type=click.Choice(["Lip", "K-smooth", "SigmaP"]))
@click.option("--smoothness", "k_smooth", default=None, type=int,
              help="K for K-smooth atoms")
@click.option("--sigma", default=None, type=float)
@click.option("--p-atom", default=None, type=float)
@click.option("--out", "out_path", required=True)
@server_option
def atoms_decompose(grid_path, s, p, q, r, levels, kind, k_smooth, sigma,
                    p_atom, out_path, server):
    with _client(server) as client:
        data = _post(client, "/atoms/decompose",
                     {"grid_text": _read(grid_path), "s": s, "p": p,
                      "q": _q_wire(q), "r": r, "levels": levels,
                      "kind": kind, "K": k_smooth, "sigma": sigma,
                      "p_atom": p_atom})
    _write(out_path, data["decomposition_text"])
    click.echo(f"{data['n_coefficients']} coefficients, "
               f"residual sup {data['residual_sup']:.3e}")


@atoms.command("reconstruct")
@click.option("--dec", "dec_path", required=True)
@click.option("--lo", required=True, help="comma-separated box corner")
@click.option("--hi", required=True, help="comma-separated box corner")
@click.option("--level", required=True, type=int)
@click.option("--upto-level", default=None, type=int)
@click.option("--out", "out_path", required=True)
@server_option
def atoms_reconstruct(dec_path, lo, hi, level, upto_level, out_path, server):
    with _client(server) as client:
        data = _post(client, "/atoms/reconstruct",
                     {"decomposition_text": _read(dec_path),
                      "lo": [float(v) for v in lo.split(",")],
                      "hi": [float(v) for v in hi.split(",")],
                      "level": level, "upto_level": upto_level})
    _write(out_path, data["grid_text"])
    click.echo(f"wrote {out_path}")


@atoms.command("reexpand")
@click.option("--dec", "dec_path", required=True)
@click.option("--smoothness", "k_smooth", default=1, type=int)
@click.option("--inner-levels", default=8, type=int)
@click.option("--out", "out_path", required=True)
@server_option
def atoms_reexpand(dec_path, k_smooth, inner_levels, out_path, server):
    with _client(server) as client:
        data = _post(client, "/atoms/reexpand",
                     {"decomposition_text": _read(dec_path), "K": k_smooth,
                      "inner_levels": inner_levels})
    _write(out_path, data["decomposition_text"])
    click.echo(f"inner residual {data['inner_sup_residual']:.3e}, "
               f"max contributors {data['max_contributors']}")


@main.group()
def trace():
    """Trace/extension round trips."""


@trace.command("roundtrip")
@click.option("--domain", "domain_path", required=True)
@click.option("--boundary-dec", "dec_path", required=True,
              help="Coefficient lines `j m1 m2 value` on boundary cubes")
@click.option("--s", required=True, type=float)
@click.option("--p", required=True, type=float)
@click.option("--q", required=True)
@click.option("--grid-level", default=6, type=int)
@server_option
def trace_roundtrip(domain_path, dec_path, s, p, q, grid_level, server):
    with _client(server) as client:
        data = _post(client, "/trace/roundtrip",
                     {"domain_text": _read(domain_path),
                      "boundary_dec_text": _read(dec_path),
                      "s": s, "p": p, "q": _q_wire(q),
                      "grid_level": grid_level})
    click.echo(data["csv_row"])


@main.group()
def multipliers():
    """Multiplier experiments: chi-profile, hset-sum, selfsimilar."""


@multipliers.command("chi-profile")
@click.option("--domain", "domain_path", required=True)
@click.option("--p", required=True, type=float)
@click.option("--q", "q_list", default="1,inf", help="comma list, inf allowed")
@click.option("--sigma", "sigma_list", required=True, help="comma list")
@click.option("--jsweep", default="2,3,4,5,6,7,8")
@click.option("--out", "out_path", default=None)
@server_option
def multipliers_chi(domain_path, p, q_list, sigma_list, jsweep, out_path,
                    server):
    with _client(server) as client:
        data = _post(client, "/multipliers/chi-profile",
                     {"domain_text": _read(domain_path), "p": p,
                      "q_values": [_q_wire(v) for v in q_list.split(",")],
                      "sigma_grid": [float(v) for v in sigma_list.split(",")],
                      "j_sweep": [int(v) for v in jsweep.split(",")]})
    if out_path:
        _write(out_path, data["csv"])
        click.echo(f"wrote {out_path}")
    else:
        click.echo(data["csv"], nl=False)


@multipliers.command("hset-sum")
@click.option("--exponent", default=None, type=float,
              help="Power gauge h(t)=t^d")
@click.option("--sigma", required=True, type=float)
@click.option("--p", required=True, type=float)
@click.option("--q", required=True)
@click.option("--dimension", "n", default=2, type=int)
@click.option("--jdepth", default=6, type=int)
@click.option("--kmax", default=40, type=int)
@server_option
def multipliers_hset(exponent, sigma, p, q, n, jdepth, kmax, server):
    with _client(server) as client:
        data = _post(client, "/multipliers/hset-sum",
                     {"exponent": exponent, "sigma": sigma, "p": p,
                      "q": _q_wire(q), "n": n, "j_depth": jdepth,
                      "k_max": kmax})
    kind = "convergent" if data["convergent"] else "divergent"
    click.echo(f"sup {data['sup']:.12g} ({kind})")


@multipliers.command("selfsimilar")
@click.option("--grid", "grid_path", required=True)
@click.option("--s", required=True, type=float)
@click.option("--p", required=True, type=float)
@click.option("--q", required=True)
@click.option("--max-dilation", default=3, type=int)
@click.option("--translations", default="0:0",
              help="semicolon-separated integer vectors, e.g. 0:0;1:0")
@click.option("--window-level", default=6, type=int)
@server_option
def multipliers_selfsimilar(grid_path, s, p, q, max_dilation, translations,
                            window_level, server):
    trans = [[int(c) for c in part.split(":")]
             for part in translations.split(";")]
    with _client(server) as client:
        data = _post(client, "/multipliers/selfsimilar",
                     {"grid_text": _read(grid_path), "s": s, "p": p,
                      "q": _q_wire(q), "max_dilation": max_dilation,
                      "translations": trans, "window_level": window_level})
    click.echo(f"value {data['value']:.12g} at (j={data['argmax_dilation']}, "
               f"l={data['argmax_translation']}); sup-norm "
               f"{data['sup_norm']:.12g}, embedding constant "
               f"{data['embedding_constant']:.12g}")


if __name__ == "__main__":
    main()
