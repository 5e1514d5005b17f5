/**
 * The Python program that owns a session's namespace. The supervisor
 * spawns it as `python3 -c <source> <allowed-json> <limits-json>` and
 * exchanges one JSON line per request over its stdio.
 *
 * The worker moves its protocol channel off fd 1 before running any
 * snippet, so code that prints or writes to the real stdout can never
 * corrupt the protocol stream.
 */

export const WORKER_SOURCE: string = `
import ast
import contextlib
import io
import json
import os
import sys
import tempfile
import time
import traceback

ALLOWED = json.loads(sys.argv[1]) if len(sys.argv) > 1 else []
LIMITS = json.loads(sys.argv[2]) if len(sys.argv) > 2 else {}
STDOUT_CAP = int(LIMITS.get("stdout_cap", 16384))
STDERR_CAP = int(LIMITS.get("stderr_cap", 16384))
MEMORY_BYTES = int(LIMITS.get("memory_bytes", 0))
TIMEOUT_S = float(LIMITS.get("timeout_s", 60))

# Claim the protocol channel, then point fd 1 at /dev/null so snippet
# writes (even raw os.write(1, ...)) cannot speak protocol.
PROTO_OUT = os.fdopen(os.dup(1), "w", buffering=1)
_devnull = os.open(os.devnull, os.O_WRONLY)
os.dup2(_devnull, 1)
os.close(_devnull)

BANNER = {"rlimit_as": False, "rlimit_cpu": False}
try:
    import resource
    if MEMORY_BYTES > 0:
        try:
            resource.setrlimit(resource.RLIMIT_AS, (MEMORY_BYTES, MEMORY_BYTES))
            BANNER["rlimit_as"] = True
        except (ValueError, OSError):
            pass
    # Cumulative CPU backstop for the whole session; wall-clock timeouts
    # are enforced by the supervisor per snippet.
    cpu_cap = max(300, int(TIMEOUT_S * 20))
    try:
        resource.setrlimit(resource.RLIMIT_CPU, (cpu_cap, cpu_cap + 5))
        BANNER["rlimit_cpu"] = True
    except (ValueError, OSError):
        pass
except ImportError:
    pass


class PolicyViolation(PermissionError):
    pass


# The supervisor hands each session a private scratch dir via TMPDIR;
# only that exact dir is allowed, never the shared system tempdir, so
# sessions cannot see each other's scratch files.
_PRIVATE_TMP = os.environ.get("TMPDIR", "")
if _PRIVATE_TMP:
    os.makedirs(_PRIVATE_TMP, exist_ok=True)
    tempfile.tempdir = _PRIVATE_TMP


def _policy_roots():
    roots = [os.path.realpath(p) for p in ALLOWED]
    roots.append(os.path.realpath(os.getcwd()))
    roots.append(os.path.realpath(sys.prefix))
    roots.append(os.path.realpath(sys.base_prefix))
    roots.append(os.path.realpath(os.path.dirname(os.__file__)))
    roots.append(os.path.realpath(os.devnull))
    if _PRIVATE_TMP:
        roots.append(os.path.realpath(_PRIVATE_TMP))
    return sorted(set(roots))


POLICY_ROOTS = _policy_roots()


def _audit_open(event, args):
    if event != "open":
        return
    path = args[0]
    if isinstance(path, bytes):
        path = path.decode("utf-8", "ignore")
    if not isinstance(path, str):
        return  # fd re-open, already vetted
    resolved = os.path.realpath(path)
    for root in POLICY_ROOTS:
        if resolved == root or resolved.startswith(root + os.sep):
            return
    raise PolicyViolation("access denied by policy: " + resolved)


sys.addaudithook(_audit_open)

NAMESPACE = {"__name__": "__main__"}


def _cap(text, cap):
    if len(text) <= cap:
        return text, False
    marker = "\\n...[truncated, " + str(len(text)) + " chars total]"
    return text[:cap] + marker, True


def run_snippet(code):
    out_buf, err_buf = io.StringIO(), io.StringIO()
    status = "ok"
    value_repr = None
    started = time.monotonic()
    try:
        tree = ast.parse(code, "<snippet>", "exec")
        trailing = None
        if tree.body and isinstance(tree.body[-1], ast.Expr):
            trailing = ast.Expression(tree.body[-1].value)
            tree.body = tree.body[:-1]
        with contextlib.redirect_stdout(out_buf), contextlib.redirect_stderr(err_buf):
            if tree.body:
                exec(compile(tree, "<snippet>", "exec"), NAMESPACE)
            if trailing is not None:
                value = eval(compile(trailing, "<snippet>", "eval"), NAMESPACE)
                if value is not None:
                    value_repr = repr(value)
    except PolicyViolation as exc:
        status = "resource_limit"
        err_buf.write(type(exc).__name__ + ": " + str(exc) + "\\n")
    except MemoryError:
        status = "resource_limit"
        err_buf.write("MemoryError: memory cap exceeded\\n")
    except BaseException as exc:
        status = "runtime_error"
        tb = exc.__traceback__
        if tb is not None and tb.tb_next is not None:
            tb = tb.tb_next  # drop the worker's own exec frame
        err_buf.write("".join(traceback.format_exception(type(exc), exc, tb)))
    duration_ms = int((time.monotonic() - started) * 1000)

    stdout, out_trunc = _cap(out_buf.getvalue(), STDOUT_CAP)
    stderr, err_trunc = _cap(err_buf.getvalue(), STDERR_CAP)
    val_trunc = False
    if value_repr is not None:
        value_repr, val_trunc = _cap(value_repr, STDOUT_CAP)
    return {
        "status": status,
        "stdout": stdout,
        "stderr": stderr,
        "value_repr": value_repr,
        "duration_ms": duration_ms,
        "truncated": out_trunc or err_trunc or val_trunc,
    }


def reply(payload):
    PROTO_OUT.write(json.dumps(payload) + "\\n")
    PROTO_OUT.flush()


def main():
    while True:
        line = sys.stdin.readline()
        if line == "":
            return 0
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        rid = request.get("id", -1)
        op = request.get("op")
        if op == "ping":
            reply({
                "id": rid, "status": "ok", "stdout": "pong", "stderr": "",
                "value_repr": json.dumps(BANNER, sort_keys=True),
                "duration_ms": 0, "truncated": False,
            })
        elif op == "reset":
            NAMESPACE.clear()
            NAMESPACE["__name__"] = "__main__"
            reply({
                "id": rid, "status": "ok", "stdout": "", "stderr": "",
                "value_repr": None, "duration_ms": 0, "truncated": False,
            })
        elif op == "exec":
            result = run_snippet(request.get("code", ""))
            result["id"] = rid
            reply(result)
        elif op == "shutdown":
            reply({
                "id": rid, "status": "ok", "stdout": "", "stderr": "",
                "value_repr": None, "duration_ms": 0, "truncated": False,
            })
            return 0
        else:
            reply({
                "id": rid, "status": "runtime_error", "stdout": "",
                "stderr": "unknown op: " + str(op), "value_repr": None,
                "duration_ms": 0, "truncated": False,
            })


if __name__ == "__main__":
    sys.exit(main())
`;
