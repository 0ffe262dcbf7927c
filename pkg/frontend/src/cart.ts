import type { CartPayloadLine, MenuDish } from "./types.js";

export type CartLine = {
  dishId: string;
  name: string;
  qty: number;
  // true iff this line's FIRST add came from the recommendation strip
  fromRecommendation: boolean;
};

function newSessionId(): string {
  return `kiosk-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}

// The live cart: one merged line per dish, quantities >= 1.
export class Cart {
  readonly sessionId: string;
  private lines = new Map<string, CartLine>();

  constructor(sessionId?: string) {
    this.sessionId = sessionId ?? newSessionId();
  }

  addItem(dish: MenuDish, viaRecommendation: boolean): void {
    const existing = this.lines.get(dish.id);
    if (existing) {
      existing.qty += 1;
      // the flag records the line's origin; later adds never change it
    } else {
      this.lines.set(dish.id, {
        dishId: dish.id,
        name: dish.name,
        qty: 1,
        fromRecommendation: viaRecommendation,
      });
    }
  }

  /** Remove one unit; the line disappears at qty 0. */
  removeItem(dishId: string): void {
    const line = this.lines.get(dishId);
    if (!line) return;
    line.qty -= 1;
    if (line.qty < 1) this.lines.delete(dishId);
  }

  removeLine(dishId: string): void {
    this.lines.delete(dishId);
  }

  clear(): void {
    this.lines.clear();
  }

  has(dishId: string): boolean {
    return this.lines.has(dishId);
  }

  get size(): number {
    return this.lines.size;
  }

  get empty(): boolean {
    return this.lines.size === 0;
  }

  snapshot(): CartLine[] {
    return [...this.lines.values()].map((line) => ({ ...line }));
  }

  toRecommendPayload(): CartPayloadLine[] {
    return [...this.lines.values()].map((line) => ({
      dish_id: line.dishId,
      name: line.name,
      qty: line.qty,
    }));
  }
}
