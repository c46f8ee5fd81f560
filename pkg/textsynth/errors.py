'''
This module contains the exceptions (and the one warning) raised by
the textsynth package.
'''


class TextSynthError(Exception):
    '''Base class of every error raised by textsynth'''


class ShapeError(TextSynthError, ValueError):
    '''Arrays that should share dimensions do not'''


class EmptyInstance(TextSynthError, ValueError):
    '''A text instance has an empty stroke mask'''


class DegenerateBBox(TextSynthError, ValueError):
    '''A bounding box covers no pixel centre'''


class NoFiniteDistance(TextSynthError, ValueError):
    '''An appearance distance map holds no finite value'''


class NoValidInstances(TextSynthError, ValueError):
    '''A scene record has no valid text instance'''


class DegenerateQuad(TextSynthError, ValueError):
    '''A quadrilateral has collinear corners or zero area'''


class SingularTransform(TextSynthError, ValueError):
    '''A homography is not invertible'''


class EmptyRegion(TextSynthError, ValueError):
    '''A (soft) region mask sums to zero'''


class InvalidInstance(TextSynthError, ValueError):
    '''The requested text instance does not exist or is flagged invalid'''


class GlyphError(TextSynthError, ValueError):
    '''A font has no glyph for a character of the text'''


class TextOverflowError(TextSynthError, ValueError):
    '''Text does not fit the patch even at the smallest size'''


class ConfigError(TextSynthError, ValueError):
    '''Configuration values or assets are missing or inconsistent'''


class PlacementRejected(TextSynthError, ValueError):
    '''A transformed text instance would leave the image'''


class DatasetIOError(TextSynthError, OSError):

    '''
    A file of a dataset record is missing or unreadable.
    '''

    def __init__(self, record_id, message):
        super().__init__(f'{record_id}: {message}')
        self.record_id = record_id
        self.message = message

    def __reduce__(self):
        return (self.__class__, (self.record_id, self.message))


class AnnotationParseError(TextSynthError, ValueError):

    '''
    An annotation line could not be parsed. Carries the file
    and the (1-based) line number.
    '''

    def __init__(self, path, line, message):
        super().__init__(f'{path}:{line}: {message}')
        self.path = path
        self.line = line
        self.message = message

    def __reduce__(self):
        return (self.__class__, (self.path, self.line, self.message))


class EmptySynthesis(UserWarning):
    '''No text instance could be placed on a background'''
