import { ApiClient } from "./api.js";
import { App } from "./app.js";

const api = new ApiClient("");
const app = new App(api, document);

document.getElementById("sort-toggle")?.addEventListener("click", () => {
  app.toggleSort();
  void app.loadTriage();
});

void app.loadTriage();
