/**
 * Before/after scene comparison: list which attributes changed per entity so
 * the monitor can show "color: red -> blue" next to the two final images.
 */

import type { SceneDocument, SceneEntity } from "./api.js";

export interface AttributeChange {
  entityId: string;
  entityClass: string;
  attribute: "color" | "shape" | "texture" | "position";
  before: string | null;
  after: string | null;
}

export interface SceneDiff {
  changed: AttributeChange[];
  added: SceneEntity[];
  removed: SceneEntity[];
}

const ATTRIBUTES = ["color", "shape", "texture", "position"] as const;

export function diffScenes(before: SceneDocument, after: SceneDocument): SceneDiff {
  const beforeById = new Map(before.entities.map((e) => [e.id, e]));
  const afterById = new Map(after.entities.map((e) => [e.id, e]));
  const diff: SceneDiff = { changed: [], added: [], removed: [] };

  for (const entity of before.entities) {
    const other = afterById.get(entity.id);
    if (!other) {
      diff.removed.push(entity);
      continue;
    }
    for (const attr of ATTRIBUTES) {
      const a = entity[attr] ?? null;
      const b = other[attr] ?? null;
      if (a !== b) {
        diff.changed.push({
          entityId: entity.id,
          entityClass: entity.class,
          attribute: attr,
          before: a,
          after: b,
        });
      }
    }
  }
  for (const entity of after.entities) {
    if (!beforeById.has(entity.id)) diff.added.push(entity);
  }
  return diff;
}
