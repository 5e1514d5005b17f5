/**
 * Session supervisor: owns the worker lifecycle and the protocol
 * guarantees — exactly one reply per request, matching id, in order;
 * timeouts kill and relaunch the worker instead of wedging the session;
 * a crashing snippet is a reply, never a runner exit.
 */

import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { type ExecReply, type ExecRequest, type RunnerLimits, makeReply } from "./protocol.js";
import { PythonWorker, WorkerDied } from "./worker.js";

/** Extra wall-clock slack past timeout_s before the worker is killed. */
const KILL_GRACE_MS = 250;

const NAMESPACE_LOST =
	"session namespace was lost and has been reset; redefine variables before reuse";

class SnippetTimeout extends Error {}

export class RunnerSession {
	private worker: PythonWorker;
	private lastId = 0;
	private readonly scratchDir: string;

	constructor(
		private readonly pythonPath: string,
		private readonly workingDir: string,
		private readonly allowedPaths: string[],
		private readonly limits: RunnerLimits,
	) {
		// Session-private scratch space, outside the user's data dir.
		this.scratchDir = mkdtempSync(join(tmpdir(), "sandbox-session-"));
		this.worker = this.spawnWorker();
	}

	private spawnWorker(): PythonWorker {
		return new PythonWorker(
			this.pythonPath,
			this.workingDir,
			this.allowedPaths,
			this.limits,
			this.scratchDir,
		);
	}

	private async respawn(): Promise<void> {
		await this.worker.kill();
		this.worker = this.spawnWorker();
	}

	/** Handle one request; always resolves to exactly one reply. */
	async handle(request: ExecRequest): Promise<ExecReply> {
		if (request.id <= this.lastId) {
			return makeReply(request.id, "runtime_error", {
				stderr: `non-monotonic request id ${request.id} (last was ${this.lastId})`,
			});
		}
		this.lastId = request.id;

		switch (request.op) {
			case "ping":
				return this.forward(request.id, { op: "ping", id: request.id }, this.limits.startup_s);
			case "reset":
				return this.forward(request.id, { op: "reset", id: request.id }, this.limits.timeout_s);
			case "shutdown":
				return makeReply(request.id, "ok");
			case "exec": {
				const timeoutS = request.timeout_s ?? this.limits.timeout_s;
				return this.execWithDeadline(request.id, request.code ?? "", timeoutS);
			}
		}
	}

	private async execWithDeadline(id: number, code: string, timeoutS: number): Promise<ExecReply> {
		const started = Date.now();
		try {
			const raw = await this.withDeadline(
				this.worker.request({ op: "exec", id, code }),
				timeoutS * 1000 + KILL_GRACE_MS,
			);
			return this.fromWorker(id, raw);
		} catch (err) {
			if (err instanceof SnippetTimeout) {
				await this.respawn();
				return makeReply(id, "timeout", {
					stderr: `snippet exceeded ${timeoutS}s and was killed; ${NAMESPACE_LOST}`,
					duration_ms: Date.now() - started,
				});
			}
			if (err instanceof WorkerDied) {
				await this.respawn();
				return makeReply(id, "runtime_error", {
					stderr: `worker process died while executing the snippet; ${NAMESPACE_LOST}`,
					duration_ms: Date.now() - started,
				});
			}
			throw err;
		}
	}

	private async forward(
		id: number,
		payload: Record<string, unknown>,
		timeoutS: number,
	): Promise<ExecReply> {
		try {
			const raw = await this.withDeadline(this.worker.request(payload), timeoutS * 1000);
			return this.fromWorker(id, raw);
		} catch (err) {
			if (err instanceof SnippetTimeout || err instanceof WorkerDied) {
				await this.respawn();
				return makeReply(id, "runtime_error", {
					stderr: `worker unavailable (${(err as Error).message}); ${NAMESPACE_LOST}`,
				});
			}
			throw err;
		}
	}

	private fromWorker(id: number, raw: Record<string, unknown>): ExecReply {
		return makeReply(id, (raw.status as ExecReply["status"]) ?? "runtime_error", {
			stdout: typeof raw.stdout === "string" ? raw.stdout : "",
			stderr: typeof raw.stderr === "string" ? raw.stderr : "",
			value_repr: typeof raw.value_repr === "string" ? raw.value_repr : null,
			duration_ms: typeof raw.duration_ms === "number" ? raw.duration_ms : 0,
			truncated: raw.truncated === true,
		});
	}

	private withDeadline<T>(work: Promise<T>, ms: number): Promise<T> {
		return new Promise((resolve, reject) => {
			const timer = setTimeout(() => reject(new SnippetTimeout(`deadline of ${ms}ms passed`)), ms);
			work.then(
				(value) => {
					clearTimeout(timer);
					resolve(value);
				},
				(err) => {
					clearTimeout(timer);
					reject(err);
				},
			);
		});
	}

	async close(): Promise<void> {
		await this.worker.kill();
		rmSync(this.scratchDir, { recursive: true, force: true });
	}
}
