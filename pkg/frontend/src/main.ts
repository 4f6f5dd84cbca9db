/** Browser bootstrap: mount the studio against a service origin.
 *
 * The service origin defaults to the page's own origin and can be
 * overridden with `?api=http://host:port` for the common case of the
 * static files and the API living on different ports.
 */

import { EditServiceClient } from "./api.js";
import { Studio } from "./studio.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? window.location.origin;
const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const studio = new Studio(root, new EditServiceClient(base));
void studio.init();
