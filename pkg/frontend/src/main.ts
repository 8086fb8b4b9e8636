import { GatewayClient } from "./api";
import { ConsoleController } from "./controller";
import { mountConsole } from "./render";
import "./styles.css";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
const controller = new ConsoleController(new GatewayClient(""));
mountConsole(root, controller);
