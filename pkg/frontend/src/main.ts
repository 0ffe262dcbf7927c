import { mountKiosk } from "./ui.js";

// The kiosk page talks to the recommendation service on the same origin by
// default; `?service=http://host:port` points it elsewhere (demo setups).
const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "";

const root = document.getElementById("app");
if (root) {
  mountKiosk(root, { baseUrl }).catch((err) => {
    root.textContent = `Service unreachable: ${err instanceof Error ? err.message : err}`;
  });
}
