// Wire types for the recommendation service (GET /v1/menu, POST /v1/recommend,
// POST /v1/orders).  Money stays in its decimal-string wire form; the kiosk
// never does arithmetic on it beyond display totals in integer cents.

export type MenuDish = {
  id: string;
  name: string;
  category: [string, string, string];
  unit_price: string;
  unit_cost: string;
  unit_tax: string;
};

export type Menu = {
  dishes: MenuDish[];
};

export type CartPayloadLine = {
  dish_id?: string;
  name: string;
  qty: number;
};

export type SlateItem = {
  dish_id: string;
  name: string;
  score: number;
};

export type SlateResponse = {
  model_version: number | string;
  items: SlateItem[];
};

export type OrderPayloadLine = {
  dish_id: string;
  name: string;
  qty: number;
  unit_price: string;
  unit_cost: string;
  unit_tax: string;
  from_recommendation: boolean;
};

export type OrderPayload = {
  order_id: string;
  session_id: string;
  restaurant_id: string;
  ts: string;
  lines: OrderPayloadLine[];
};

export function centsOf(money: string): number {
  const [units, frac = ""] = money.split(".");
  return parseInt(units, 10) * 100 + parseInt(frac.padEnd(2, "0") || "0", 10);
}

export function formatCents(cents: number): string {
  const units = Math.floor(cents / 100);
  const rest = Math.abs(cents % 100);
  return `${units}.${String(rest).padStart(2, "0")}`;
}
