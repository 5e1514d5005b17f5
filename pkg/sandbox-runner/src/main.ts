/**
 * Entry point. Launch contract:
 *
 *   node dist/main.js --working-dir <dir> --allow <path> [--allow ...] --limits <file>
 *
 * Requests arrive one JSON object per stdin line; every request gets
 * exactly one stdout reply line with a matching id, in order. The
 * process exits only on shutdown or stdin EOF.
 */

import { readFileSync, statSync } from "node:fs";
import { createInterface } from "node:readline";
import {
	DEFAULT_LIMITS,
	ProtocolError,
	type RunnerLimits,
	makeReply,
	parseRequestLine,
	serializeReply,
} from "./protocol.js";
import { RunnerSession } from "./session.js";

interface CliArgs {
	workingDir: string;
	allow: string[];
	limitsFile: string | null;
	pythonPath: string;
}

function parseArgs(argv: string[]): CliArgs {
	const args: CliArgs = {
		workingDir: ".",
		allow: [],
		limitsFile: null,
		pythonPath: process.env.SANDBOX_PYTHON ?? "python3",
	};
	for (let i = 0; i < argv.length; i += 1) {
		const flag = argv[i];
		const value = () => {
			i += 1;
			if (i >= argv.length) {
				throw new Error(`missing value for ${flag}`);
			}
			return argv[i];
		};
		switch (flag) {
			case "--working-dir":
				args.workingDir = value();
				break;
			case "--allow":
				args.allow.push(value());
				break;
			case "--limits":
				args.limitsFile = value();
				break;
			case "--python":
				args.pythonPath = value();
				break;
			default:
				throw new Error(`unknown flag ${flag}`);
		}
	}
	return args;
}

function loadLimits(path: string | null): RunnerLimits {
	if (path === null) {
		return { ...DEFAULT_LIMITS };
	}
	const raw = JSON.parse(readFileSync(path, "utf-8")) as Partial<RunnerLimits>;
	return { ...DEFAULT_LIMITS, ...raw };
}

export function main(): void {
	let args: CliArgs;
	try {
		args = parseArgs(process.argv.slice(2));
		statSync(args.workingDir);
	} catch (err) {
		process.stderr.write(`sandbox-runner: ${(err as Error).message}\n`);
		process.exit(2);
	}
	const limits = loadLimits(args.limitsFile);
	const session = new RunnerSession(args.pythonPath, args.workingDir, args.allow, limits);

	const lines = createInterface({ input: process.stdin, terminal: false });
	let chain: Promise<void> = Promise.resolve();

	const emit = (reply: ReturnType<typeof makeReply>) => {
		process.stdout.write(serializeReply(reply) + "\n");
	};

	lines.on("line", (line) => {
		if (!line.trim()) {
			return;
		}
		// Strict ordering: each request is handled after the previous
		// one's reply has been written.
		chain = chain.then(async () => {
			let shutdown = false;
			try {
				const request = parseRequestLine(line);
				shutdown = request.op === "shutdown";
				emit(await session.handle(request));
			} catch (err) {
				if (err instanceof ProtocolError) {
					emit(makeReply(-1, "runtime_error", { stderr: err.message }));
				} else {
					emit(makeReply(-1, "runtime_error", { stderr: `internal error: ${(err as Error).message}` }));
				}
			}
			if (shutdown) {
				await session.close();
				process.exit(0);
			}
		});
	});

	lines.on("close", () => {
		chain = chain.then(async () => {
			await session.close();
			process.exit(0);
		});
	});
}

main();
