"""Command line surface.

Exit codes: 0 success, 1 stage failure, 2 validation/configuration failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError, CorpusLoopError, PredecessorIncomplete, StageFailed, ValidationFailed
from .project import STAGES, Config, Project

EXIT_OK = 0
EXIT_STAGE_FAILURE = 1
EXIT_VALIDATION_FAILURE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corpusloop",
        description="Compile a domain corpus into a layered knowledge structure, derive a "
                    "benchmark and training corpus from it, score predictions, and assemble "
                    "targeted repair data.",
    )
    parser.add_argument("--project", "-p", default=".", help="project root directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init", help="initialize a project directory")
    p_init.add_argument("--config", help="config file to copy in (key = value lines)")
    p_init.add_argument("--seed", type=int, help="override the seed")
    p_init.add_argument("--demo", action="store_true",
                        help="bundle the demo corpus, replay fixtures, and round-1 predictions")

    for stage in STAGES:
        p_stage = sub.add_parser(stage, help=f"run the {stage} stage")
        p_stage.add_argument("--backend-mode", choices=("live", "replay"), help="override backend mode")
        p_stage.add_argument("--fixtures", help="override fixture file path")
        p_stage.add_argument("--seed", type=int, help="override the seed")

    p_run = sub.add_parser("run", help="run all stages through mix (plus report)")
    p_run.add_argument("--backend-mode", choices=("live", "replay"))
    p_run.add_argument("--fixtures")
    p_run.add_argument("--seed", type=int)

    p_serve = sub.add_parser("serve", help="serve the HTTP API (and studio UI when built)")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8321)
    p_serve.add_argument("--frontend", help="directory of built UI assets to serve at /")
    return parser


def _effective_config(project: Project, args: argparse.Namespace) -> Config:
    config = project.config
    if getattr(args, "backend_mode", None):
        config.values["backend_mode"] = args.backend_mode
    if getattr(args, "fixtures", None):
        config.values["fixture_path"] = args.fixtures
    if getattr(args, "seed", None) is not None:
        config.values["seed"] = str(args.seed)
    return config


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    root = Path(args.project)

    try:
        if args.command == "init":
            if args.demo:
                from .demo import build_demo_project

                build_demo_project(root, seed=args.seed if args.seed is not None else 42)
                print(f"initialized demo project at {root}")
            else:
                config_text = Path(args.config).read_text(encoding="utf-8") if args.config else None
                Project.init(root, config_text=config_text, seed=args.seed)
                print(f"initialized project at {root}")
            return EXIT_OK

        project = Project(root)

        if args.command == "serve":
            import uvicorn

            from .api import create_app

            frontend = args.frontend
            if frontend is None:
                default_front = root / "frontend" / "dist"
                bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
                if default_front.is_dir():
                    frontend = default_front
                elif bundled.is_dir():
                    frontend = bundled
            app = create_app(root, frontend_dir=frontend)
            uvicorn.run(app, host=args.host, port=args.port)
            return EXIT_OK

        if args.command == "run":
            config = _effective_config(project, args)
            for stage in STAGES:
                print(f"==> {stage}")
                project.run_stage(stage, config=config)
            print("all stages complete")
            return EXIT_OK

        config = _effective_config(project, args)
        manifest = project.run_stage(args.command, config=config)
        stage = manifest.stages[args.command]
        print(f"{args.command}: {stage['status']}; artifacts: {', '.join(stage['artifact_paths'])}")
        return EXIT_OK

    except (ConfigError, PredecessorIncomplete, ValidationFailed) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION_FAILURE
    except StageFailed as exc:
        if isinstance(exc.inner, (ConfigError, ValidationFailed)):
            print(f"validation error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION_FAILURE
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE
    except CorpusLoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE


if __name__ == "__main__":
    sys.exit(main())
