#!/usr/bin/env python3
"""DML Captioning Entry Point"""

import asyncio
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Ensure package root is in Python path for consistent imports
package_root = Path(__file__).parent.parent
if str(package_root) not in sys.path:
    sys.path.insert(0, str(package_root))

from dml_captioning.src.cli import build_parser
from dml_captioning.src.config.runtime import configure_runtime
from dml_captioning.src.errors import DMLError
from dml_captioning.src.utils import setup_logging


def run(argv: Optional[List[str]] = None) -> Dict[str, Any]:
    """Parse arguments, configure the runtime and run one command handler."""
    args = build_parser().parse_args(argv)
    try:
        runtime = configure_runtime(log_level=args.log_level)
    except DMLError as e:
        return {"status": "error", "error": str(e), "exit_code": e.exit_code}
    setup_logging(runtime.log_level)
    return asyncio.run(args.handler(args))


def main(argv: Optional[List[str]] = None) -> None:
    """Run a command, print its result as JSON and exit with its code."""
    result = run(argv)
    print(json.dumps(result, indent=2, default=str))
    if result.get("status") != "success":
        sys.exit(int(result.get("exit_code", 1)))


if __name__ == "__main__":
    main()
