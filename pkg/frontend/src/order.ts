import type { ServiceClient } from "./api.js";
import { ServiceError } from "./api.js";
import type { CartLine } from "./cart.js";
import type { MenuDish, OrderPayload } from "./types.js";

let orderCounter = 0;

export function freshOrderId(sessionId: string): string {
  orderCounter += 1;
  return `${sessionId}-o${orderCounter}-${Math.random().toString(36).slice(2, 8)}`;
}

function utcSecondTimestamp(now: Date): string {
  return now.toISOString().replace(/\.\d{3}Z$/, "Z");
}

// Full money fields are copied from the menu at checkout time; the
// from_recommendation flags travel with the lines so the margin metric can
// attribute strip-driven purchases downstream.
export function buildOrderPayload(
  lines: CartLine[],
  sessionId: string,
  menuById: Map<string, MenuDish>,
  restaurantId = "kiosk-demo",
  now: Date = new Date(),
): OrderPayload {
  if (lines.length === 0) throw new Error("cannot checkout an empty cart");
  return {
    order_id: freshOrderId(sessionId),
    session_id: sessionId,
    restaurant_id: restaurantId,
    ts: utcSecondTimestamp(now),
    lines: lines.map((line) => {
      const dish = menuById.get(line.dishId);
      if (!dish) throw new Error(`cart line not on the menu: ${line.dishId}`);
      return {
        dish_id: line.dishId,
        name: line.name,
        qty: line.qty,
        unit_price: dish.unit_price,
        unit_cost: dish.unit_cost,
        unit_tax: dish.unit_tax,
        from_recommendation: line.fromRecommendation,
      };
    }),
  };
}

export type CheckoutResult =
  | { status: "accepted"; orderId: string }
  | { status: "failed"; message: string };

// Submit the order; a duplicate-id collision (409) is retried once with a
// fresh id, anything else surfaces to the operator with the cart preserved.
export async function checkout(
  client: ServiceClient,
  lines: CartLine[],
  sessionId: string,
  menuById: Map<string, MenuDish>,
  restaurantId?: string,
): Promise<CheckoutResult> {
  let payload = buildOrderPayload(lines, sessionId, menuById, restaurantId);
  for (let attempt = 0; attempt < 2; attempt += 1) {
    try {
      await client.submitOrder(payload);
      return { status: "accepted", orderId: payload.order_id };
    } catch (err) {
      if (err instanceof ServiceError && err.status === 409 && attempt === 0) {
        payload = { ...payload, order_id: freshOrderId(sessionId) };
        continue;
      }
      const message = err instanceof Error ? err.message : String(err);
      return { status: "failed", message };
    }
  }
  return { status: "failed", message: "duplicate order id after retry" };
}
