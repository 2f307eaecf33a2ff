# Minimal PDF text documents: lines of Courier text laid out top to
# bottom and split into pages automatically, rendered with reportlab.

import io
import textwrap

from reportlab.pdfgen.canvas import Canvas

import curriplan.artifact as artifact

# A4, millimeters
PAGE_WIDTH = 210.0
PAGE_HEIGHT = 297.0

NORMAL = "Courier"
BOLD = "Courier-Bold"

# width of one Courier character, as a fraction of the font size
_COURIER_ADVANCE = 0.6


# convert mm to points (1/72 inch).
def mm2points(mm):
    return mm * 2.83464567


# line height in mm for font size 'size' (points)
def textHeight(size):
    return size / 2.83464567 * 1.2


class TextOp:
    def __init__(self, text, x, y, size, font):
        self.text = text

        # position of the top of the text, mm from the top-left corner
        self.x = x
        self.y = y

        self.size = size
        self.font = font


# a document of text pages. addText() starts a new page when the current
# one is full.
class TextFormatter:
    def __init__(self, margin=20.0, fontSize=10):
        # list of pages, each a list of TextOps
        self.pages = []

        # how much to leave empty on each side (mm)
        self.margin = margin

        self.fontSize = fontSize

        # number of characters that fit on a single line
        self.charsToLine = int(
            (PAGE_WIDTH - margin * 2.0)
            / (fontSize * _COURIER_ADVANCE / mm2points(1.0))
        )

        self.createPage()

    # add new empty page, select it as current, reset y pos
    def createPage(self):
        self.pg = []
        self.pages.append(self.pg)
        self.y = self.margin

    # add blank vertical space, unless we're at the top of the page
    def addSpace(self, mm):
        if self.y > self.margin:
            self.y += mm

    def addText(self, text, x=None, fs=None, font=NORMAL):
        if x is None:
            x = self.margin

        if fs is None:
            fs = self.fontSize

        yd = textHeight(fs)

        if (self.y + yd) > (PAGE_HEIGHT - self.margin):
            self.createPage()

        self.pg.append(TextOp(text, x, self.y, fs, font))

        self.y += yd

    # wrap text into lines that fit on the page and add them. 'indent' is
    # the text to prefix lines other than the first one with.
    def addWrappedText(self, text, indent):
        for s in textwrap.wrap(text, self.charsToLine, subsequent_indent=indent):
            self.addText(s)

    # header row plus rows, each cell padded to its column's width
    def addTable(self, header, rows):
        cells = [[str(c) for c in header]] + [[str(c) for c in r] for r in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(header))]

        for i, r in enumerate(cells):
            line = "  ".join(c.rjust(w) for c, w in zip(r, widths))
            self.addText(line, font=BOLD if i == 0 else NORMAL)

    # render the document and return the PDF data
    def generate(self, title):
        buf = io.BytesIO()

        # invariant output, so identical reports are identical bytes
        canvas = Canvas(
            buf,
            pagesize=(mm2points(PAGE_WIDTH), mm2points(PAGE_HEIGHT)),
            invariant=1,
        )

        canvas.setCreator(artifact.GENERATOR)
        canvas.setProducer(artifact.GENERATOR)
        canvas.setTitle(title)

        for i, pg in enumerate(self.pages):
            for op in pg:
                # PDF positions text by its baseline, we by its top
                canvas.setFont(op.font, op.size)
                canvas.drawString(
                    mm2points(op.x),
                    mm2points(PAGE_HEIGHT - op.y) - 0.843 * op.size,
                    op.text,
                )

            if i < len(self.pages) - 1:
                canvas.showPage()

        canvas.save()

        return buf.getvalue()
