/**
 * Wire protocol: newline-delimited JSON over stdio, one message per line.
 * Field-by-field documentation with bit-exact examples lives in
 * ../docs/protocol.md at the repository root.
 */

export type RequestOp = "exec" | "reset" | "ping" | "shutdown";
export type ReplyStatus = "ok" | "runtime_error" | "timeout" | "resource_limit";

export interface ExecRequest {
	id: number;
	op: RequestOp;
	code?: string;
	timeout_s?: number;
}

export interface ExecReply {
	id: number;
	status: ReplyStatus;
	stdout: string;
	stderr: string;
	value_repr: string | null;
	duration_ms: number;
	truncated: boolean;
}

export interface RunnerLimits {
	startup_s: number;
	timeout_s: number;
	stdout_cap: number;
	stderr_cap: number;
	memory_bytes: number;
}

export const DEFAULT_LIMITS: RunnerLimits = {
	startup_s: 10,
	timeout_s: 60,
	stdout_cap: 16 * 1024,
	stderr_cap: 16 * 1024,
	memory_bytes: 2 * 1024 * 1024 * 1024,
};

const OPS: ReadonlySet<string> = new Set(["exec", "reset", "ping", "shutdown"]);

export class ProtocolError extends Error {}

/** Parse and validate one request line. Throws ProtocolError on garbage. */
export function parseRequestLine(line: string): ExecRequest {
	let raw: unknown;
	try {
		raw = JSON.parse(line);
	} catch (err) {
		throw new ProtocolError(`request is not valid JSON: ${(err as Error).message}`);
	}
	if (typeof raw !== "object" || raw === null) {
		throw new ProtocolError("request is not an object");
	}
	const record = raw as Record<string, unknown>;
	if (typeof record.id !== "number" || !Number.isInteger(record.id)) {
		throw new ProtocolError("request id must be an integer");
	}
	if (typeof record.op !== "string" || !OPS.has(record.op)) {
		throw new ProtocolError(`unknown op ${JSON.stringify(record.op)}`);
	}
	if (record.op === "exec" && (typeof record.code !== "string" || record.code.length === 0)) {
		throw new ProtocolError("exec requests require code");
	}
	if (record.timeout_s !== undefined && (typeof record.timeout_s !== "number" || record.timeout_s <= 0)) {
		throw new ProtocolError("timeout_s must be a positive number");
	}
	return {
		id: record.id,
		op: record.op as RequestOp,
		code: typeof record.code === "string" ? record.code : undefined,
		timeout_s: typeof record.timeout_s === "number" ? record.timeout_s : undefined,
	};
}

export function serializeReply(reply: ExecReply): string {
	return JSON.stringify(reply);
}

export function makeReply(id: number, status: ReplyStatus, fields: Partial<ExecReply> = {}): ExecReply {
	return {
		id,
		status,
		stdout: "",
		stderr: "",
		value_repr: null,
		duration_ms: 0,
		truncated: false,
		...fields,
	};
}

/** Cap a text field, appending a marker that names the original size. */
export function capOutput(text: string, cap: number): { text: string; truncated: boolean } {
	if (text.length <= cap) {
		return { text, truncated: false };
	}
	return { text: text.slice(0, cap) + `\n...[truncated, ${text.length} chars total]`, truncated: true };
}
