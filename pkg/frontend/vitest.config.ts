import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    testTimeout: 120_000,
    hookTimeout: 240_000,
    // the integration test owns a real service process; run files serially
    fileParallelism: false,
  },
});
