import { defineConfig } from "vitest/config";

export default defineConfig({
  build: {
    outDir: "dist",
    sourcemap: true,
  },
  server: {
    // Local development proxies API calls to a gateway started with
    // `casegpt serve`; the production bundle is served same-origin.
    proxy: {
      "/v1": "http://127.0.0.1:8080",
    },
  },
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
  },
});
