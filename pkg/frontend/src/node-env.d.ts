// Minimal ambient declarations for the two Node builtins the scripted
// driver touches, so the browser-oriented build needs no @types/node.

declare module "node:fs" {
  export function readFileSync(path: string, encoding: string): string;
  export function writeFileSync(path: string, data: string): void;
}

declare const process: {
  argv: string[];
  exit(code?: number): never;
};
