import { defineConfig } from "vitest/config";

// the service round-trip spawns a python server twice; give hooks and
// tests room well past the default 5 s
export default defineConfig({
  test: {
    environment: "node",
    testTimeout: 60_000,
    hookTimeout: 120_000,
  },
});
