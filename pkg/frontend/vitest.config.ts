import { defineConfig } from "vitest/config";

export default defineConfig({
    test: {
        pool: "threads",
        poolOptions: { threads: { singleThread: true } },
        environment: "node",
        testTimeout: 150000,
    },
});
