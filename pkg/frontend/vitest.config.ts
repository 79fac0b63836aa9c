import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // the lifecycle suite boots the real dispatch service as a subprocess
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
