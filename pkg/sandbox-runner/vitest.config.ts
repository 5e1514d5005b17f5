import { defineConfig } from "vitest/config";

export default defineConfig({
	test: {
		include: ["test/**/*.test.ts"],
		testTimeout: 60_000,
		hookTimeout: 30_000,
		// Sessions are real subprocesses; keep files sequential so load
		// tests get honest wall-clock numbers.
		fileParallelism: false,
	},
});
