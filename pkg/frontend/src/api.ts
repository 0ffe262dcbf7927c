import type { CartPayloadLine, Menu, OrderPayload, SlateResponse } from "./types.js";

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

// Thin client over the service's three kiosk-facing endpoints.
export class ServiceClient {
  constructor(private readonly baseUrl: string) {}

  async fetchMenu(): Promise<Menu> {
    const resp = await fetch(`${this.baseUrl}/v1/menu`);
    if (!resp.ok) throw new ServiceError(resp.status, "menu unavailable");
    return (await resp.json()) as Menu;
  }

  async fetchSlate(cart: CartPayloadLine[]): Promise<SlateResponse> {
    const resp = await fetch(`${this.baseUrl}/v1/recommend`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ cart }),
    });
    if (!resp.ok) throw new ServiceError(resp.status, "recommendation unavailable");
    return (await resp.json()) as SlateResponse;
  }

  async submitOrder(order: OrderPayload): Promise<void> {
    const resp = await fetch(`${this.baseUrl}/v1/orders`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(order),
    });
    if (resp.status === 201) return;
    const detail = await resp.text().catch(() => "");
    throw new ServiceError(resp.status, detail || `order rejected (${resp.status})`);
  }
}
