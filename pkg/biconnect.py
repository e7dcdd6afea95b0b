import json
import re
import signal
import sys
from dataclasses import replace

import click
import numpy as np

from models.errors import BiconnectError
from models.fields import ConnectionWord
from processors.connection import (
    check_biunitarity,
    direct_sum,
    fourier_matrix,
    hadamard_connection,
    intertwiner_space,
    kappa_weights,
    parallel_connection,
    product,
    renormalize,
)
from processors.graphs import balance_residuals, builtin_example, compute_pf, validate_config
from processors.strings import action_defects, check_flatness, solve_flat_fields
from processors.tensor4 import check_tensor_biunitarity, connection_to_tensor
from processors.zipper import TheoremVerifier, verify_theorem
from utils import console
from utils.fixtures import (
    basis_to_dict,
    check_document,
    config_from_dict,
    config_to_dict,
    connection_from_dict,
    connection_to_dict,
    field_from_dict,
    field_to_dict,
    load_json,
    resolve_path,
    save_json,
)
from utils.settings import Settings

EXIT_PASS, EXIT_FAIL, EXIT_DISAGREE, EXIT_INPUT = 0, 1, 2, 3

# Connections available without a fixture file: example:<name>(<n>)
MATRICES = {
    "fourier": fourier_matrix,
    "identity": lambda n: np.eye(n),
}


def _read_document(ref, settings):
    """(data, base_dir) from a file name, a fixture name or '-' for stdin"""
    if ref == "-":
        try:
            data = json.loads(sys.stdin.read())
        except json.JSONDecodeError as e:
            raise BiconnectError(f"invalid JSON on stdin at <stdin>:{e.lineno}:{e.colno}: {e.msg}") from None
        return check_document(data, "<stdin>"), None
    path = resolve_path(ref, settings=settings)
    return load_json(path), path


def _builtin_connection(name):
    match = re.fullmatch(r"(\w+)\((\d+)\)", name)
    if not match:
        raise click.BadParameter(f"cannot parse example {name!r}")
    kind, n = match.group(1), int(match.group(2))
    if kind == "parallel":
        return parallel_connection(fourier_matrix(n))
    if kind not in MATRICES:
        raise click.BadParameter(f"unknown example connection {kind!r}")
    return hadamard_connection(MATRICES[kind](n))


def load_connection_ref(ref, settings):
    if ref.startswith("example:"):
        return _builtin_connection(ref[len("example:"):])
    data, path = _read_document(ref, settings)
    return connection_from_dict(data, location=path or "<stdin>")


def load_config_ref(ref, settings):
    """(config, pf or None); connections are accepted and give their configuration"""
    if ref.startswith("example:"):
        return builtin_example(ref[len("example:"):]), None
    data, path = _read_document(ref, settings)
    if data.get("kind") == "connection":
        w = connection_from_dict(data, location=path or "<stdin>")
        return w.config, w.pf
    return config_from_dict(data, path or "<stdin>")


def emit(ctx, data):
    """Write the JSON report to --out, or print it on stdout"""
    options = ctx.obj
    text = save_json({**data, "tol": options["settings"].tol, "seed": options["settings"].seed}, options["out"])
    if options["out"] is None:
        click.echo(text)


def _default_word(w, second, settings):
    letters = [w, load_connection_ref(second, settings) if second else renormalize(w, "prime")]
    return ConnectionWord(tuple(letters))


@click.group()
@click.option("--tol", type=float, default=None, help="Check tolerance (default BICONNECT_TOL or 1e-9)")
@click.option("--seed", type=int, default=None, help="Seed of the random-field generator")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report file (default stdout)")
@click.option("--parallel", type=int, default=1, show_default=True, help="Worker threads for random-field suites")
@click.option("--quiet", is_flag=True, help="Only print errors on stderr")
@click.pass_context
def cli(ctx, tol, seed, out, parallel, quiet):
    """Bi-unitary connections, flat fields and the zipper condition"""
    settings = Settings.from_env()
    overrides = {k: v for k, v in (("tol", tol), ("seed", seed)) if v is not None}
    if overrides:
        settings = replace(settings, **overrides)
    console.set_quiet(quiet)
    ctx.obj = {"settings": settings, "out": out, "parallel": max(parallel, 1)}


@cli.command()
@click.argument("config")
@click.pass_context
def validate(ctx, config):
    """Check the standing assumptions on a configuration"""
    cfg, _ = load_config_ref(config, ctx.obj["settings"])
    report = validate_config(cfg)
    emit(ctx, {"kind": "validation", "config": cfg.name, **report.to_dict()})
    if report.passed:
        console.ok(f"{cfg.name} is a valid configuration")
        return EXIT_PASS
    console.fail(f"{cfg.name} fails: {', '.join(c.name for c in report.failures)}")
    return EXIT_FAIL


@cli.command()
@click.argument("config")
@click.pass_context
def pf(ctx, config):
    """Perron-Frobenius weights of a configuration"""
    settings = ctx.obj["settings"]
    cfg, _ = load_config_ref(config, settings)
    weights = compute_pf(cfg, max_iter=settings.pf_max_iter)
    data = config_to_dict(cfg, weights)
    data.update(kind="pf", residuals=balance_residuals(cfg, weights))
    emit(ctx, data)
    console.ok(f"beta0 = {weights.beta0:.12f}, beta1 = {weights.beta1:.12f}")
    return EXIT_PASS


@cli.command("check-biunitary")
@click.argument("connection")
@click.pass_context
def check_biunitary(ctx, connection):
    """Unitarity of W and of its prime renormalization (and the 4-tensor identities)"""
    settings = ctx.obj["settings"]
    w = load_connection_ref(connection, settings)
    report = check_biunitarity(w, settings.tol)
    tensor_report = check_tensor_biunitarity(connection_to_tensor(w), settings.tol)
    emit(ctx, {"kind": "biunitarity", "connection": report.to_dict(), "tensor": tensor_report.to_dict()})
    if report.passed:
        console.ok(f"bi-unitary (max defect {report.max_defect:.2e})")
        return EXIT_PASS
    console.fail(f"not bi-unitary (max defect {report.max_defect:.2e})")
    return EXIT_FAIL


@cli.command()
@click.argument("connection")
@click.option("--mode", type=click.Choice(["prime", "bar", "bar_prime"]), default="prime", show_default=True)
@click.option("--normalization", type=click.Choice(["connection", "tensor"]), default="connection")
@click.pass_context
def renorm(ctx, connection, mode, normalization):
    """Write a renormalization of a connection"""
    w = load_connection_ref(connection, ctx.obj["settings"])
    report = connection_to_dict(renormalize(w, mode), normalization)
    # Square-root weight of each (top, bottom) edge pair of the source connection
    report["kappa"] = kappa_weights(w).tolist()
    emit(ctx, report)
    return EXIT_PASS


@cli.command("product")
@click.argument("first")
@click.argument("second")
@click.pass_context
def product_command(ctx, first, second):
    """Vertical product of two connections"""
    settings = ctx.obj["settings"]
    w = product(load_connection_ref(first, settings), load_connection_ref(second, settings), settings.tol)
    emit(ctx, connection_to_dict(w))
    return EXIT_PASS


@cli.command()
@click.argument("first")
@click.argument("second")
@click.pass_context
def dsum(ctx, first, second):
    """Direct sum of two connections on the same horizontal graphs"""
    settings = ctx.obj["settings"]
    w = direct_sum(load_connection_ref(first, settings), load_connection_ref(second, settings), settings.tol)
    emit(ctx, connection_to_dict(w))
    return EXIT_PASS


@cli.command()
@click.argument("connection")
@click.pass_context
def irreducible(ctx, connection):
    """Dimension of the self-intertwiner space"""
    settings = ctx.obj["settings"]
    w = load_connection_ref(connection, settings)
    basis = intertwiner_space(w, w, settings.tol, settings.dim_cap)
    emit(ctx, {"kind": "irreducibility", "dimension": len(basis), "irreducible": len(basis) == 1})
    if len(basis) == 1:
        console.ok("irreducible")
        return EXIT_PASS
    console.warn(f"reducible: intertwiner space has dimension {len(basis)}")
    return EXIT_FAIL


@cli.command("flat-fields")
@click.argument("connection")
@click.option("--second", default=None, help="Second letter of the word (default: the prime renormalization)")
@click.pass_context
def flat_fields(ctx, connection, second):
    """Basis of the flat fields of the word [connection, second]"""
    settings = ctx.obj["settings"]
    w = load_connection_ref(connection, settings)
    word = _default_word(w, second, settings)
    basis = solve_flat_fields(word, settings.tol, settings.dim_cap)
    defects = [check_flatness(f, word, settings.tol)[1] for f in basis]
    emit(ctx, basis_to_dict(basis, defects))
    console.ok(f"flat-field space has dimension {len(basis)}")
    return EXIT_PASS


def _load_field(ref, config, settings):
    data, path = _read_document(ref, settings)
    return field_from_dict(data, config, path or "<stdin>")


@cli.command("theorem-verify")
@click.argument("connection")
@click.option("--field", "field_ref", default=None, help="Field fixture; without it a random-field suite runs")
@click.option("--second", default=None, help="Second letter of the word (default: the prime renormalization)")
@click.option("--samples", type=int, default=100, show_default=True)
@click.pass_context
def theorem_verify(ctx, connection, field_ref, second, samples):
    """Evaluate the four equivalent conditions (half zipper, zipper, half flat, flat)"""
    settings = ctx.obj["settings"]
    w = load_connection_ref(connection, settings)
    word = _default_word(w, second, settings)

    if field_ref is not None:
        report = verify_theorem(_load_field(field_ref, w.config, settings), word, settings.tol)
        emit(ctx, {"kind": "theorem", **report.to_dict()})
        if not report.agreement:
            console.fail(f"conditions disagree: {report.verdicts}")
            return EXIT_DISAGREE
        if report.flat:
            console.ok("all four conditions hold")
            return EXIT_PASS
        console.warn("all four conditions fail")
        return EXIT_FAIL

    verifier = TheoremVerifier(word, settings.tol, settings.seed)
    results = verifier.run(samples, ctx.obj["parallel"])
    emit(ctx, {
        "kind": "theorem_suite",
        "samples": samples,
        "flat_dimension": len(verifier.flat_basis),
        "reports": {name: report.to_dict() for name, report in results.items()},
    })
    if all(report.agreement for report in results.values()):
        return EXIT_PASS
    return EXIT_DISAGREE


@cli.command("action-check")
@click.argument("connection")
@click.option("--field", "field_ref", default=None, help="Field fixture (default: the first flat basis element)")
@click.option("--levels", type=int, default=3, show_default=True, help="Check levels 0..LEVELS")
@click.option("--star0", type=int, default=0)
@click.option("--star1", type=int, default=0)
@click.pass_context
def action_check(ctx, connection, field_ref, levels, star0, star1):
    """Compatibility of the field action with the level embeddings of the open strings"""
    settings = ctx.obj["settings"]
    w = load_connection_ref(connection, settings)
    if field_ref is None:
        f = solve_flat_fields(ConnectionWord((w, renormalize(w, "prime"))), settings.tol)[0]
    else:
        f = _load_field(field_ref, w.config, settings)
    defects = action_defects(f, w, range(levels + 1), settings.tol, star0, star1)
    worst = max(defects.values())
    emit(ctx, {"kind": "action", "field": field_to_dict(f), "defects": {str(k): v for k, v in defects.items()}})
    if worst < settings.tol:
        console.ok(f"action is compatible up to level {levels + 1} (max defect {worst:.2e})")
        return EXIT_PASS
    console.fail(f"action is not compatible (max defect {worst:.2e})")
    return EXIT_FAIL


@cli.command()
@click.option("--id", "example_id", required=True, help="example1, example2, hadamard(n), parallel(n)")
@click.option("--matrix", type=click.Choice(sorted(MATRICES)), default=None,
              help="Also build the connection of this matrix (hadamard and parallel only)")
@click.pass_context
def example(ctx, example_id, matrix):
    """Write a built-in configuration (with PF data) or connection"""
    cfg = builtin_example(example_id)
    if matrix is None:
        emit(ctx, config_to_dict(cfg, compute_pf(cfg)))
        return EXIT_PASS
    n = cfg.g1.num_edges
    if cfg.name.startswith("parallel"):
        w = parallel_connection(MATRICES[matrix](n))
    elif cfg.name.startswith("hadamard"):
        w = hadamard_connection(MATRICES[matrix](n))
    else:
        raise click.BadParameter("--matrix needs hadamard(n) or parallel(n)")
    emit(ctx, connection_to_dict(w))
    return EXIT_PASS


def main(argv=None):
    """Run the CLI and return its exit code"""
    try:
        code = cli.main(args=argv, prog_name="biconnect", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_INPUT
    except click.exceptions.Abort:
        console.fail("aborted")
        return EXIT_INPUT
    except (BiconnectError, ValueError) as e:
        console.fail(str(e))
        return EXIT_INPUT
    return code if isinstance(code, int) else EXIT_PASS


def _interrupted(signum, frame):
    console.fail("interrupted")
    sys.exit(EXIT_INPUT)


if __name__ == "__main__":
    signal.signal(signal.SIGINT, _interrupted)
    signal.signal(signal.SIGTERM, _interrupted)
    sys.exit(main())
