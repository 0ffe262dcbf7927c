import { ServiceClient } from "./api.js";
import { Cart } from "./cart.js";
import { checkout } from "./order.js";
import { SlateRefresher } from "./slate.js";
import { centsOf, formatCents } from "./types.js";
import type { SlateItem, SlateResponse } from "./types.js";

export type KioskOptions = {
  baseUrl: string;
  restaurantId?: string;
  debounceMs?: number;
};

export type Kiosk = {
  cart: Cart;
  refresher: SlateRefresher;
  root: HTMLElement;
};

// Builds the whole kiosk screen: a scrollable menu grid on the left, the cart
// with the "Add to your order" strip and checkout on the right.
export async function mountKiosk(root: HTMLElement, options: KioskOptions): Promise<Kiosk> {
  const client = new ServiceClient(options.baseUrl);
  const menu = await client.fetchMenu();
  const menuById = new Map(menu.dishes.map((d) => [d.id, d]));
  const cart = new Cart();

  root.innerHTML = `
    <div class="kiosk">
      <section class="menu-panel">
        <h1>Menu</h1>
        <div class="menu-grid" data-testid="menu-grid"></div>
      </section>
      <aside class="cart-panel">
        <h1>Your order</h1>
        <ul class="cart-lines" data-testid="cart-lines"></ul>
        <p class="cart-total" data-testid="cart-total"></p>
        <section class="slate" data-testid="slate" hidden>
          <h2>Add to your order</h2>
          <div class="slate-items" data-testid="slate-items"></div>
        </section>
        <button class="checkout" data-testid="checkout" disabled>Checkout</button>
        <p class="banner" data-testid="banner" hidden></p>
        <p class="confirmation" data-testid="confirmation" hidden></p>
      </aside>
    </div>`;

  const menuGrid = root.querySelector<HTMLElement>('[data-testid="menu-grid"]')!;
  const cartList = root.querySelector<HTMLElement>('[data-testid="cart-lines"]')!;
  const cartTotal = root.querySelector<HTMLElement>('[data-testid="cart-total"]')!;
  const slateSection = root.querySelector<HTMLElement>('[data-testid="slate"]')!;
  const slateItems = root.querySelector<HTMLElement>('[data-testid="slate-items"]')!;
  const checkoutButton = root.querySelector<HTMLButtonElement>('[data-testid="checkout"]')!;
  const banner = root.querySelector<HTMLElement>('[data-testid="banner"]')!;
  const confirmation = root.querySelector<HTMLElement>('[data-testid="confirmation"]')!;

  const refresher = new SlateRefresher(
    (lines) => client.fetchSlate(lines),
    (slate) => renderSlate(slate),
    () => hideSlate(),
    options.debounceMs ?? 200,
  );

  function refresh(): void {
    renderCart();
    refresher.request(cart.toRecommendPayload());
  }

  function renderMenu(): void {
    menuGrid.textContent = "";
    for (const dish of menu.dishes) {
      const card = document.createElement("button");
      card.className = "dish-card";
      card.dataset.dishId = dish.id;
      card.innerHTML = `<span class="dish-name"></span><span class="dish-price"></span>`;
      card.querySelector(".dish-name")!.textContent = dish.name;
      card.querySelector(".dish-price")!.textContent = dish.unit_price;
      card.addEventListener("click", () => {
        cart.addItem(dish, false);
        confirmation.hidden = true;
        refresh();
      });
      menuGrid.appendChild(card);
    }
  }

  function renderCart(): void {
    cartList.textContent = "";
    let totalCents = 0;
    for (const line of cart.snapshot()) {
      const dish = menuById.get(line.dishId);
      if (dish) totalCents += centsOf(dish.unit_price) * line.qty;
      const item = document.createElement("li");
      item.className = "cart-line";
      item.dataset.dishId = line.dishId;
      if (line.fromRecommendation) item.dataset.fromRecommendation = "true";
      item.innerHTML = `
        <span class="line-name"></span>
        <span class="line-qty"></span>
        <button class="minus" aria-label="remove one">-</button>
        <button class="plus" aria-label="add one">+</button>`;
      item.querySelector(".line-name")!.textContent = line.name;
      item.querySelector(".line-qty")!.textContent = `x${line.qty}`;
      item.querySelector(".minus")!.addEventListener("click", () => {
        cart.removeItem(line.dishId);
        refresh();
      });
      item.querySelector(".plus")!.addEventListener("click", () => {
        const d = menuById.get(line.dishId);
        if (d) cart.addItem(d, false);
        refresh();
      });
      cartList.appendChild(item);
    }
    cartTotal.textContent = cart.empty ? "" : `Total: ${formatCents(totalCents)}`;
    checkoutButton.disabled = cart.empty;
  }

  function renderSlate(slate: SlateResponse): void {
    // never display a dish that is missing from the fetched menu
    const items = slate.items.filter((item) => menuById.has(item.dish_id)).slice(0, 4);
    slateItems.textContent = "";
    if (items.length === 0) {
      slateSection.hidden = true;
      return;
    }
    for (const item of items) {
      slateItems.appendChild(slateCard(item));
    }
    slateSection.hidden = false;
  }

  function slateCard(item: SlateItem): HTMLElement {
    const dish = menuById.get(item.dish_id)!;
    const card = document.createElement("button");
    card.className = "slate-card";
    card.dataset.dishId = item.dish_id;
    card.innerHTML = `<span class="dish-name"></span><span class="dish-price"></span>`;
    card.querySelector(".dish-name")!.textContent = dish.name;
    card.querySelector(".dish-price")!.textContent = dish.unit_price;
    card.addEventListener("click", () => {
      cart.addItem(dish, true);
      confirmation.hidden = true;
      refresh();
    });
    return card;
  }

  function hideSlate(): void {
    slateSection.hidden = true;
    slateItems.textContent = "";
  }

  checkoutButton.addEventListener("click", () => {
    void (async () => {
      checkoutButton.disabled = true;
      banner.hidden = true;
      const result = await checkout(
        client,
        cart.snapshot(),
        cart.sessionId,
        menuById,
        options.restaurantId,
      );
      if (result.status === "accepted") {
        cart.clear();
        confirmation.textContent = `Order ${result.orderId} accepted. Enjoy!`;
        confirmation.hidden = false;
        refresh();
      } else {
        banner.textContent = `Checkout failed: ${result.message}`;
        banner.hidden = false;
        checkoutButton.disabled = cart.empty;
      }
    })();
  });

  renderMenu();
  refresh();
  return { cart, refresher, root };
}
