// Typed client for the /api/v1 backend. All requests flow through here so
// the anonymity toggle is honored uniformly: every body-carrying call
// attaches the current identity, and in anonymous mode no student_ref is
// ever serialized.

export interface Identity {
  mode: "named" | "anonymous";
  student_ref?: string;
}

export interface FaqItem {
  id: string;
  question: string;
  answer: string | null;
  answer_source: string;
  published: boolean;
  member_count: number;
  view_count: number;
}

export interface KeywordProposal {
  text: string;
  score: number;
}

export interface ChatHead {
  question_id: string;
  served_from: "llm" | "faq_cache";
  topic: string | null;
  faq_group_id: string;
}

export interface ChatChunk {
  content?: string;
  done: boolean;
  error?: string;
}

export interface IdentityState {
  anonymous: boolean;
  studentRef: string;
}

export class ApiClient {
  identity: IdentityState = { anonymous: false, studentRef: "" };

  constructor(
    private baseUrl: string,
    private token: string,
    private fetchFn: typeof fetch = fetch.bind(globalThis),
  ) {}

  currentIdentity(): Identity {
    if (this.identity.anonymous || !this.identity.studentRef) {
      return { mode: "anonymous" };
    }
    return { mode: "named", student_ref: this.identity.studentRef };
  }

  private async request(method: string, path: string, body?: unknown): Promise<any> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        "Content-Type": "application/json",
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      const detail = await resp.text();
      throw new Error(`${method} ${path} failed (${resp.status}): ${detail}`);
    }
    return resp.json();
  }

  // --- staff ---

  listFaq(courseId: string, role: "student" | "staff"): Promise<{ items: FaqItem[] }> {
    return this.request("GET", `/api/v1/faq?course=${encodeURIComponent(courseId)}&role=${role}`);
  }

  updateFaq(groupId: string, patch: { answer?: string; published?: boolean }): Promise<FaqItem> {
    return this.request("PUT", `/api/v1/faq/${groupId}`, patch);
  }

  createFaq(courseId: string, question: string, answer: string): Promise<{ group_id: string }> {
    return this.request("POST", "/api/v1/faq", { course_id: courseId, question, answer });
  }

  extractKeywords(exerciseId: string): Promise<{ keywords: KeywordProposal[] }> {
    return this.request("POST", `/api/v1/exercises/${exerciseId}/keywords/extract`);
  }

  reviewKeywords(
    exerciseId: string,
    decisions: { keyword: string; action: "accept" | "remove" | "add" }[],
  ): Promise<{ exercise_id: string; active_keywords: string[] }> {
    return this.request("PUT", `/api/v1/exercises/${exerciseId}/keywords`, { decisions });
  }

  topicCounts(courseId: string): Promise<{ topic_counts: Record<string, number> }> {
    return this.request("GET", `/api/v1/analytics/${courseId}/topics`);
  }

  faqViewCounts(courseId: string): Promise<{ faq_view_counts: Record<string, number> }> {
    return this.request("GET", `/api/v1/analytics/${courseId}/faq-views`);
  }

  difficultyHistograms(
    courseId: string,
  ): Promise<{ difficulty_histograms: Record<string, number[]> }> {
    return this.request("GET", `/api/v1/analytics/${courseId}/difficulty`);
  }

  // --- student ---

  recordView(groupId: string): Promise<{ view_count: number }> {
    return this.request("POST", `/api/v1/faq/${groupId}/view`, {
      identity: this.currentIdentity(),
    });
  }

  rateExercise(exerciseId: string, value: number): Promise<{ ok: boolean }> {
    return this.request("POST", `/api/v1/exercises/${exerciseId}/rating`, {
      value,
      identity: this.currentIdentity(),
    });
  }

  // Streams the chat response. The textbox content goes out verbatim: the
  // client never rewrites or wraps the question text.
  async chat(
    courseId: string,
    text: string,
    onHead: (head: ChatHead) => void,
    onChunk: (fragment: string) => void,
    exerciseId?: string,
  ): Promise<string> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1/chat`, {
      method: "POST",
      headers: {
        Authorization: `Bearer ${this.token}`,
        "Content-Type": "application/json",
      },
      body: JSON.stringify({
        course_id: courseId,
        text,
        exercise_id: exerciseId ?? null,
        identity: this.currentIdentity(),
      }),
    });
    if (!resp.ok || !resp.body) {
      throw new Error(`chat failed (${resp.status})`);
    }
    let sawHead = false;
    let full = "";
    for await (const line of ndjsonLines(resp.body)) {
      const obj = JSON.parse(line);
      if (!sawHead) {
        sawHead = true;
        onHead(obj as ChatHead);
        continue;
      }
      const chunk = obj as ChatChunk;
      if (chunk.error) {
        throw new Error(chunk.error);
      }
      if (chunk.content) {
        full += chunk.content;
        onChunk(chunk.content);
      }
      if (chunk.done) break;
    }
    return full;
  }
}

// Splits a byte stream into newline-delimited records, tolerating chunk
// boundaries that fall mid-line or mid-multibyte-character.
export async function* ndjsonLines(body: ReadableStream<Uint8Array>): AsyncGenerator<string> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  while (true) {
    const { value, done } = await reader.read();
    if (done) break;
    buffer += decoder.decode(value, { stream: true });
    let idx: number;
    while ((idx = buffer.indexOf("\n")) >= 0) {
      const line = buffer.slice(0, idx).trim();
      buffer = buffer.slice(idx + 1);
      if (line) yield line;
    }
  }
  buffer += decoder.decode();
  if (buffer.trim()) yield buffer.trim();
}
