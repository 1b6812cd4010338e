import { describe, expect, it } from "vitest";

import { escapeHtml, featureRows, formatValue, renderFeatureTable } from "../src/table.js";

describe("feature table", () => {
  const names = ["width", "area", "height"];
  const values = [2.5, -0.75, 10];

  it("sorts by name by default", () => {
    expect(featureRows(names, values).map((r) => r[0])).toEqual(["area", "height", "width"]);
  });

  it("sorts by value when asked", () => {
    expect(featureRows(names, values, "value").map((r) => r[1])).toEqual([-0.75, 2.5, 10]);
    expect(featureRows(names, values, "value", true).map((r) => r[1])).toEqual([10, 2.5, -0.75]);
  });

  it("renders one row per feature", () => {
    const html = renderFeatureTable(names, values);
    expect(html.match(/<tr>/g)).toHaveLength(4); // header + 3 rows
  });

  it("escapes markup in names", () => {
    const html = renderFeatureTable(["<b>x</b>"], [1]);
    expect(html).toContain("&lt;b&gt;x&lt;/b&gt;");
    expect(escapeHtml('a"b')).toBe("a&quot;b");
  });

  it("formats extreme magnitudes in exponent form", () => {
    expect(formatValue(1234567)).toBe("1.2346e+6");
    expect(formatValue(0.00001)).toBe("1.0000e-5");
    expect(formatValue(0)).toBe("0");
    expect(formatValue(1.25)).toBe("1.25");
  });
});
