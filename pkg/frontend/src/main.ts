import { App } from "./ui.js";

window.addEventListener("DOMContentLoaded", () => {
  new App();
});
