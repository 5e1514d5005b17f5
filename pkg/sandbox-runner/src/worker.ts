/**
 * One Python worker child: spawn, single-flight request/reply, kill.
 * The session layer owns respawning and timeout policy.
 */

import { type ChildProcessWithoutNullStreams, spawn } from "node:child_process";
import { once } from "node:events";
import type { RunnerLimits } from "./protocol.js";
import { WORKER_SOURCE } from "./worker-source.js";

export class WorkerDied extends Error {}

interface Pending {
	resolve: (reply: Record<string, unknown>) => void;
	reject: (err: Error) => void;
}

export class PythonWorker {
	private proc: ChildProcessWithoutNullStreams;
	private buffer = "";
	private pending: Pending | null = null;
	private exited = false;

	constructor(
		pythonPath: string,
		workingDir: string,
		allowedPaths: string[],
		limits: RunnerLimits,
		scratchDir: string,
	) {
		this.proc = spawn(
			pythonPath,
			["-I", "-c", WORKER_SOURCE, JSON.stringify(allowedPaths), JSON.stringify(limits)],
			{
				cwd: workingDir,
				stdio: ["pipe", "pipe", "pipe"],
				env: { PATH: process.env.PATH ?? "", TMPDIR: scratchDir },
			},
		);
		this.proc.stderr.resume(); // drain; worker diagnostics are not protocol
		this.proc.stdout.setEncoding("utf-8");
		this.proc.stdout.on("data", (chunk: string) => this.onData(chunk));
		this.proc.on("exit", () => {
			this.exited = true;
			this.failPending(new WorkerDied("worker process exited"));
		});
		this.proc.on("error", (err) => {
			this.exited = true;
			this.failPending(new WorkerDied(`worker spawn error: ${err.message}`));
		});
	}

	get alive(): boolean {
		return !this.exited;
	}

	private onData(chunk: string): void {
		this.buffer += chunk;
		let newline = this.buffer.indexOf("\n");
		while (newline !== -1) {
			const line = this.buffer.slice(0, newline).trim();
			this.buffer = this.buffer.slice(newline + 1);
			if (line && this.pending) {
				const waiter = this.pending;
				this.pending = null;
				try {
					waiter.resolve(JSON.parse(line) as Record<string, unknown>);
				} catch (err) {
					waiter.reject(new WorkerDied(`unparseable worker reply: ${(err as Error).message}`));
				}
			}
			newline = this.buffer.indexOf("\n");
		}
	}

	private failPending(err: Error): void {
		if (this.pending) {
			const waiter = this.pending;
			this.pending = null;
			waiter.reject(err);
		}
	}

	/** Send one request and await its reply. Strictly single-flight. */
	request(payload: Record<string, unknown>): Promise<Record<string, unknown>> {
		if (this.exited) {
			return Promise.reject(new WorkerDied("worker already exited"));
		}
		if (this.pending) {
			return Promise.reject(new Error("worker request already in flight"));
		}
		return new Promise((resolve, reject) => {
			this.pending = { resolve, reject };
			this.proc.stdin.write(JSON.stringify(payload) + "\n", (err) => {
				if (err) {
					this.failPending(new WorkerDied(`worker stdin broken: ${err.message}`));
				}
			});
		});
	}

	async kill(): Promise<void> {
		if (this.exited) {
			return;
		}
		this.failPending(new WorkerDied("worker killed"));
		this.proc.kill("SIGKILL");
		try {
			await once(this.proc, "exit");
		} catch {
			// already gone
		}
	}
}
