// @vitest-environment jsdom
import { afterEach, describe, expect, it, vi } from "vitest";

import { mountKiosk } from "../src/ui.js";
import type { Menu, SlateResponse } from "../src/types.js";

const menu: Menu = {
  dishes: [
    { id: "burger", name: "hamburger", category: ["burgers", "beef", "classic"], unit_price: "3.50", unit_cost: "1.20", unit_tax: "0.35" },
    { id: "cola", name: "cola", category: ["drinks", "cold", "soda"], unit_price: "1.80", unit_cost: "0.30", unit_tax: "0.18" },
    { id: "fries", name: "french fries", category: ["sides", "fried", "potato"], unit_price: "2.20", unit_cost: "0.50", unit_tax: "0.22" },
  ],
};

function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function stubService(slate: SlateResponse) {
  const calls: { url: string; body?: unknown }[] = [];
  vi.stubGlobal(
    "fetch",
    vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
      const target = String(url);
      calls.push({ url: target, body: init?.body ? JSON.parse(String(init.body)) : undefined });
      if (target.endsWith("/v1/menu")) return jsonResponse(menu);
      if (target.endsWith("/v1/recommend")) return jsonResponse(slate);
      if (target.endsWith("/v1/orders")) return jsonResponse({ status: "accepted" }, 201);
      return jsonResponse({ error: "unknown" }, 404);
    }),
  );
  return calls;
}

async function settle(ms = 30): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, ms));
}

afterEach(() => vi.unstubAllGlobals());

describe("mountKiosk", () => {
  it("renders the menu grid and keeps checkout disabled while the cart is empty", async () => {
    stubService({ model_version: 1, items: [] });
    const root = document.createElement("div");
    await mountKiosk(root, { baseUrl: "http://svc", debounceMs: 5 });
    expect(root.querySelectorAll(".dish-card")).toHaveLength(3);
    const checkoutButton = root.querySelector<HTMLButtonElement>('[data-testid="checkout"]')!;
    expect(checkoutButton.disabled).toBe(true);
  });

  it("adding from the menu updates the cart and requests a new slate", async () => {
    const calls = stubService({
      model_version: 1,
      items: [{ dish_id: "cola", name: "cola", score: 0.4 }],
    });
    const root = document.createElement("div");
    const kiosk = await mountKiosk(root, { baseUrl: "http://svc", debounceMs: 5 });
    root.querySelector<HTMLButtonElement>('.dish-card[data-dish-id="burger"]')!.click();
    await settle();
    expect(kiosk.cart.snapshot()).toEqual([
      { dishId: "burger", name: "hamburger", qty: 1, fromRecommendation: false },
    ]);
    expect(root.querySelectorAll(".cart-line")).toHaveLength(1);
    const recommends = calls.filter((c) => c.url.endsWith("/v1/recommend"));
    const last = recommends[recommends.length - 1]!.body as { cart: unknown[] };
    expect(last.cart).toEqual([{ dish_id: "burger", name: "hamburger", qty: 1 }]);
    const strip = root.querySelectorAll<HTMLElement>(".slate-card");
    expect([...strip].map((el) => el.dataset.dishId)).toEqual(["cola"]);
  });

  it("never displays slate dishes missing from the fetched menu", async () => {
    stubService({
      model_version: 1,
      items: [
        { dish_id: "ghost", name: "ghost dish", score: 0.9 },
        { dish_id: "fries", name: "french fries", score: 0.5 },
      ],
    });
    const root = document.createElement("div");
    await mountKiosk(root, { baseUrl: "http://svc", debounceMs: 5 });
    await settle();
    const strip = root.querySelectorAll<HTMLElement>(".slate-card");
    expect([...strip].map((el) => el.dataset.dishId)).toEqual(["fries"]);
  });

  it("tapping a strip item flags the line and checkout posts it", async () => {
    const calls = stubService({
      model_version: 1,
      items: [{ dish_id: "cola", name: "cola", score: 0.4 }],
    });
    const root = document.createElement("div");
    const kiosk = await mountKiosk(root, { baseUrl: "http://svc", debounceMs: 5 });
    await settle();
    root.querySelector<HTMLButtonElement>('.slate-card[data-dish-id="cola"]')!.click();
    expect(kiosk.cart.snapshot()[0]).toMatchObject({ dishId: "cola", fromRecommendation: true });
    await settle();
    root.querySelector<HTMLButtonElement>('[data-testid="checkout"]')!.click();
    await settle();
    const orderCall = calls.find((c) => c.url.endsWith("/v1/orders"));
    expect(orderCall).toBeDefined();
    const body = orderCall!.body as { lines: { dish_id: string; from_recommendation: boolean }[] };
    expect(body.lines).toEqual([
      expect.objectContaining({ dish_id: "cola", from_recommendation: true, unit_price: "1.80" }),
    ]);
    expect(kiosk.cart.empty).toBe(true);
    const confirmation = root.querySelector<HTMLElement>('[data-testid="confirmation"]')!;
    expect(confirmation.hidden).toBe(false);
    // the emptied cart disables checkout again
    expect(root.querySelector<HTMLButtonElement>('[data-testid="checkout"]')!.disabled).toBe(true);
  });

  it("hides the strip when the service errors and keeps the cart usable", async () => {
    const fetchMock = vi.fn(async (url: RequestInfo | URL) => {
      const target = String(url);
      if (target.endsWith("/v1/menu")) return jsonResponse(menu);
      return jsonResponse({ error: "down" }, 503);
    });
    vi.stubGlobal("fetch", fetchMock);
    const root = document.createElement("div");
    const kiosk = await mountKiosk(root, { baseUrl: "http://svc", debounceMs: 5 });
    await settle();
    expect(root.querySelector<HTMLElement>('[data-testid="slate"]')!.hidden).toBe(true);
    root.querySelector<HTMLButtonElement>('.dish-card[data-dish-id="burger"]')!.click();
    expect(kiosk.cart.size).toBe(1);
  });
});
