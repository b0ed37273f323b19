"""
Command line front end.
Loads a workspace, dispatches one command and renders its report as text or JSON.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from core.cover import build_cover, validate_quotient, verify_isometry
from core.errors import LipschitzError, ValidationError
from core.fold import check_geodesic, fold_sequence, lift_sequence
from core.gog import euler_char, translation_length, unweighted_volume, validate_gog, volume
from core.lipschitz import brute_force_stretch, distance, enumerate_candidates, ratio, stretch_factor
from core.morphism import gates, lipschitz_constant, validate_map, witness_certificate
from core.parser import dump_graph, dump_workspace, parse_workspace
from core.spine import (deck_action_cover, essential_edges, is_reduced, isomorphism_types,
                        star_poset, surviving_edges, verify_thmC_correspondence)
from ui.styles import render_block, render_findings, render_header, render_pairs, render_report, render_table
from utils.config import APP_NAME, DEFAULT_THREADS, LOG_DIGITS, SAMPLES_DIR
from utils.helpers import dump_json, format_fraction, render_log

logger = logging.getLogger(__name__)

COMMANDS = ("validate", "volume", "candidates", "distance", "witness", "cover", "isometry-check",
            "spine-star", "surviving", "thmC-check", "fold-run")


@dataclass
class RunOptions:
    """Per-process settings taken from the command line."""

    graph: str = None
    map: str = None
    source: str = None
    target: str = None
    quotient: str = None
    subgroup: str = "trivial"
    threads: int = DEFAULT_THREADS
    budget: int = None
    brute_check: int = None
    normalize: bool = False
    emit_intermediates: str = None
    digits: int = LOG_DIGITS
    as_json: bool = False


@dataclass
class CommandResult:
    text: str
    data: dict = field(default_factory=dict)
    exit_code: int = 0

    def render(self, as_json=False):
        return dump_json(self.data) if as_json else self.text


def _required(options, name, flag):
    value = getattr(options, name)
    if value is None:
        raise ValidationError("command line", [f"{flag} is required"])
    return value


class CommandRunner:
    """Runs commands against one loaded workspace."""

    def __init__(self, workspace, options):
        self.workspace = workspace
        self.options = options

    def run(self, command):
        handler = getattr(self, "cmd_" + command.replace("-", "_"), None)
        if handler is None:
            raise ValidationError("command line", [f"unknown command '{command}'"])
        logger.info("running %s", command)
        return handler()

    # Lookups

    def _graph(self):
        return self.workspace.graph(_required(self.options, "graph", "--graph"))

    def _map(self):
        """The map named by --map, or the unique map between --from and --to."""
        opts = self.options
        if opts.map is not None:
            f = self.workspace.map(opts.map)
        else:
            src = _required(opts, "source", "--from")
            tgt = _required(opts, "target", "--to")
            found = [name for name, g in sorted(self.workspace.maps.items())
                     if g.source.name == src and g.target.name == tgt]
            if len(found) != 1:
                raise ValidationError("command line", [f"expected one map from {src} to {tgt}, found {len(found)}"])
            f = self.workspace.map(found[0])
        for flag, given, actual in (("--from", opts.source, f.source.name), ("--to", opts.target, f.target.name)):
            if given is not None and given != actual:
                raise ValidationError(f"map {f.name}", [f"{flag} {given} does not match {actual}"])
        return f

    def _quotient(self):
        q = self.workspace.quotient(_required(self.options, "quotient", "--quotient"))
        return q, self.workspace.subgroup(self.options.subgroup, q)

    # Commands

    def cmd_validate(self):
        ws = self.workspace
        entries = []
        blocks = []
        failed = False
        for kind, table, check in (("graph", ws.graphs, validate_gog), ("map", ws.maps, validate_map),
                                   ("quotient", ws.quotients, validate_quotient)):
            for name in sorted(table):
                report = check(table[name])
                failed = failed or not report["valid"]
                blocks.append(f"{kind} {name}: " + render_findings(report))
                entries.append({"kind": kind, "name": name, "valid": report["valid"],
                                "errors": report["errors"], "warnings": report["warnings"]})
        text = "\n".join([render_header("validate")] + blocks)
        return CommandResult(text, {"command": "validate", "objects": entries}, 1 if failed else 0)

    def cmd_volume(self):
        g = self._graph()
        values = [("graph", g.name), ("volume", volume(g)), ("unweighted volume", unweighted_volume(g)),
                  ("euler characteristic", euler_char(g))]
        data = {"command": "volume", "graph": g.name, "volume": volume(g),
                "unweighted_volume": unweighted_volume(g), "euler_char": euler_char(g)}
        return CommandResult(render_block("volume", values), data)

    def cmd_candidates(self):
        g = self._graph()
        found = enumerate_candidates(g, budget=self.options.budget)
        rows = [(i, c.shape, str(c.loop), translation_length(g, c.loop)) for i, c in enumerate(found)]
        text = "\n".join([render_header(f"candidates of {g.name}: {len(found)}"),
                          render_table(rows, ("#", "shape", "loop", "length"))])
        data = {"command": "candidates", "graph": g.name,
                "candidates": [{"shape": c.shape, "loop": str(c.loop), "length": translation_length(g, c.loop)}
                               for c in found]}
        return CommandResult(text, data)

    def cmd_distance(self):
        opts = self.options
        f = self._map()
        lam, witness, scaled = distance(f, normalize=opts.normalize, threads=opts.threads, budget=opts.budget)
        log = render_log(lam, opts.digits)
        values = [("map", f.name), ("from", f.source.name), ("to", f.target.name), ("lambda", lam),
                  ("log", log), ("witness", str(witness.loop)), ("shape", witness.shape)]
        data = {"command": "distance", "map": f.name, "lambda": lam, "log": float(log),
                "witness": {"shape": witness.shape, "loop": str(witness.loop), "edges": list(witness.loop.edges),
                            "ratio": ratio(scaled, witness.loop)}}
        code = 0
        if opts.brute_check is not None:
            k = opts.brute_check
            brute, loop = brute_force_stretch(scaled, k, budget=opts.budget)
            # below the longest candidate only an upper bound is certain
            longest = max(len(c.loop.edges) for c in enumerate_candidates(scaled.source, budget=opts.budget))
            agrees = brute == lam if k >= longest else brute <= lam
            values += [("brute force", brute), ("brute force loop", str(loop)), ("brute force agrees", agrees)]
            data["brute_check"] = {"k": k, "lambda_k": brute, "loop": str(loop),
                                   "exhaustive": k >= longest, "agrees": agrees}
            if not agrees:
                code = 1
        return CommandResult(render_block("distance", values), data, code)

    def cmd_witness(self):
        opts = self.options
        f = self._map()
        lam, witness = stretch_factor(f, threads=opts.threads, budget=opts.budget)
        certificate = witness_certificate(f, witness.loop)
        structure = gates(f, threads=opts.threads)
        values = [("map", f.name), ("lambda", lam), ("lipschitz constant", lipschitz_constant(f)),
                  ("witness", str(witness.loop)), ("shape", witness.shape)]
        values += sorted(certificate.items())
        values.append(("gates", {v: structure.gate_count(v) for v in sorted(structure.blocks)}))
        data = {"command": "witness", "map": f.name, "lambda": lam, "witness": str(witness.loop),
                "shape": witness.shape, "certificate": certificate}
        return CommandResult(render_block("witness", values), data)

    def cmd_cover(self):
        q, subgroup = self._quotient()
        data = build_cover(q, subgroup)
        name = f"{q.name}_{self.options.subgroup}_cover"
        summary = data.summary()
        text = render_block(f"cover {name}", [("base", q.base.name)] + list(summary.items()))
        payload = {"command": "cover", "summary": summary, "workspace": dump_workspace(graphs={name: data.cover})}
        return CommandResult(text, payload)

    def cmd_isometry_check(self):
        opts = self.options
        f = self._map()
        q, subgroup = self._quotient()
        report = verify_isometry(f, q, subgroup, threads=opts.threads, budget=opts.budget)
        s = report["summary"]
        verdict = "equal" if s["equal"] else "different"
        line = f"{verdict}: {format_fraction(s['lambda_base'])} = {format_fraction(s['lambda_cover'])}" \
            if s["equal"] else f"{verdict}: {format_fraction(s['lambda_base'])} != {format_fraction(s['lambda_cover'])}"
        text = "\n".join([render_report(f"isometry-check {f.name}", report), line])
        data = {"command": "isometry-check", "map": f.name, "valid": report["valid"], "errors": report["errors"],
                "summary": s, "cover": dump_graph(report["target_cover"].cover)}
        return CommandResult(text, data, 0 if report["valid"] else 1)

    def cmd_spine_star(self):
        g = self._graph()
        poset = star_poset(g, budget=self.options.budget)
        terminal = [sorted(F) for F in poset.terminal()]
        chains = poset.maximal_chains(self.options.budget)
        values = [("graph", g.name), ("elements", len(poset)), ("reduced collapses", terminal),
                  ("maximal chains", len(chains)), ("isomorphism types", isomorphism_types(poset))]
        data = {"command": "spine-star", "graph": g.name, "elements": [sorted(F) for F in poset.elements],
                "reduced_collapses": terminal, "maximal_chains": len(chains),
                "isomorphism_types": isomorphism_types(poset)}
        return CommandResult(render_block("spine-star", values), data)

    def cmd_surviving(self):
        g = self._graph()
        edges = surviving_edges(g, budget=self.options.budget)
        values = [("graph", g.name), ("surviving edges", sorted(edges)), ("reduced", is_reduced(g))]
        data = {"command": "surviving", "graph": g.name, "surviving": sorted(edges), "reduced": is_reduced(g)}
        if self.options.quotient is not None:
            q, _ = self._quotient()
            cover, action = deck_action_cover(q)
            orbits = essential_edges(cover.cover, action, budget=self.options.budget)
            values.append(("essential orbits", len(orbits)))
            data["essential_orbits"] = [sorted(o) for o in sorted(orbits, key=min)]
        return CommandResult(render_block("surviving", values), data)

    def cmd_thmC_check(self):
        q, _ = self._quotient()
        g = self.workspace.graph(self.options.graph) if self.options.graph else q.base
        if g is not q.base:
            raise ValidationError(f"quotient {q.name}", [f"is defined on {q.base.name}, not {g.name}"])
        report = verify_thmC_correspondence(g, q, budget=self.options.budget)
        text = render_report(f"thmC-check {g.name}", report)
        data = {"command": "thmC-check", "graph": g.name, "valid": report["valid"], "errors": report["errors"],
                "warnings": report["warnings"], "summary": report["summary"]}
        return CommandResult(text, data, 0 if report["valid"] else 1)

    def cmd_fold_run(self):
        opts = self.options
        f = self._map()
        seq = fold_sequence(f, budget=opts.budget)
        report = check_geodesic(seq, f, threads=opts.threads, budget=opts.budget)
        rows = [(i + 1, ev.kind, turn_text(ev.turn), len(ev.graph.edges), volume(ev.graph)) for i, ev in enumerate(seq.events)]
        parts = [render_report(f"fold-run {f.name}", report),
                 render_table(rows, ("event", "kind", "turn", "edges", "volume")) if rows else "no fold events"]
        data = {"command": "fold-run", "map": f.name, "valid": report["valid"], "errors": report["errors"],
                "summary": report["summary"],
                "events": [{"kind": ev.kind, "turn": turn_text(ev.turn), "edges": len(ev.graph.edges)} for ev in seq.events]}
        valid = report["valid"]
        if opts.quotient is not None:
            q, subgroup = self._quotient()
            lifted = lift_sequence(seq, q, subgroup, threads=opts.threads, budget=opts.budget)
            parts.append(render_report("lifted sequence", lifted))
            data["lifted"] = {"valid": lifted["valid"], "errors": lifted["errors"], "summary": lifted["summary"]}
            valid = valid and lifted["valid"]
        if opts.emit_intermediates:
            written = emit_intermediates(seq, opts.emit_intermediates)
            parts.append(render_pairs([("intermediates", len(written))]))
            data["intermediates"] = [str(p) for p in written]
        return CommandResult("\n".join(parts), data, 0 if valid else 1)


def turn_text(turn):
    first, second = turn
    return f"v{first.vertex}: e{first.edge}.{first.coset} ~ e{second.edge}.{second.coset}"


def emit_intermediates(seq, directory):
    """Write every point of a fold sequence as its own workspace file."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, point in enumerate(seq.points):
        name = f"step_{i:02d}"
        path = out / f"{name}.json"
        path.write_text(dump_json(dump_workspace(graphs={name: point})) + "\n", encoding="utf-8")
        written.append(path)
    logger.info("wrote %d intermediate graphs to %s", len(written), out)
    return written


def run(command, workspace, options=None):
    """
    Dispatch one command.

    Returns:
        CommandResult: text, JSON-ready data and exit code
    """
    return CommandRunner(workspace, options or RunOptions()).run(command)


# Argument parsing

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", nargs="+", metavar="FILE",
                        help="workspace JSON files (default: every file in the sample corpus)")
    common.add_argument("--json", dest="as_json", action="store_true", help="emit JSON instead of text")
    common.add_argument("--threads", type=int, default=DEFAULT_THREADS)
    common.add_argument("--budget", type=int, default=None)
    common.add_argument("--digits", type=int, default=LOG_DIGITS, help="decimals when rendering log(lambda)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--graph")
    common.add_argument("--map")
    common.add_argument("--from", dest="source")
    common.add_argument("--to", dest="target")
    common.add_argument("--quotient")
    common.add_argument("--subgroup", default="trivial")
    common.add_argument("--brute-check", type=int, metavar="K", default=None)
    common.add_argument("--normalize", action="store_true")
    common.add_argument("--emit-intermediates", metavar="DIR", default=None)

    parser = argparse.ArgumentParser(prog=APP_NAME, description="Exact Lipschitz distances on Outer Space "
                                                                "of virtually free groups.")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        commands.add_parser(name, parents=[common])
    return parser


def options_from_args(args):
    return RunOptions(graph=args.graph, map=args.map, source=args.source, target=args.target,
                      quotient=args.quotient, subgroup=args.subgroup, threads=max(1, args.threads),
                      budget=args.budget, brute_check=args.brute_check, normalize=args.normalize,
                      emit_intermediates=args.emit_intermediates, digits=args.digits, as_json=args.as_json)


def workspace_files(args):
    if args.workspace:
        return args.workspace
    return sorted(str(p) for p in Path(SAMPLES_DIR).glob("*.json"))


def execute(args, stdout=None, stderr=None):
    """
    Load the workspace named by args, run the command and print its output.

    Returns:
        int: process exit code
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    options = options_from_args(args)
    try:
        workspace = parse_workspace(workspace_files(args), validate=args.command != "validate")
        result = run(args.command, workspace, options)
    except LipschitzError as exc:
        logger.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=stderr)
        return exc.exit_code
    print(result.render(options.as_json), file=stdout)
    return result.exit_code
