// Single-page bootstrap: picks the staff or student surface based on the
// role configured at load time. Deployed as one static bundle next to the
// backend; talks only to /api/v1.

import { ApiClient } from "./api.js";
import { StaffDashboard } from "./staff.js";
import { StudentView } from "./student.js";

interface UiConfig {
  baseUrl: string;
  courseId: string;
  role: "student" | "staff";
  token: string;
}

export async function boot(root: HTMLElement, config: UiConfig): Promise<void> {
  const api = new ApiClient(config.baseUrl, config.token);
  if (config.role === "staff") {
    await new StaffDashboard(api, config.courseId, root).render();
  } else {
    await new StudentView(api, config.courseId, root).render();
  }
}

declare global {
  interface Window {
    COURSELENS_CONFIG?: UiConfig;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const config = window.COURSELENS_CONFIG ?? {
    baseUrl: "",
    courseId: new URLSearchParams(location.search).get("course") ?? "",
    role: (new URLSearchParams(location.search).get("role") as "staff" | "student") ?? "student",
    token: new URLSearchParams(location.search).get("token") ?? "",
  };
  boot(document.getElementById("app")!, config);
}
